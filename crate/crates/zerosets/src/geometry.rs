//! Non-isotropic geometry near the boundary: `tau`, extremal bases, McNeal
//! polydiscs, the pseudodistance, the norm `k`, cap areas and polyannuli.

use crate::domain::{DefiningForm, Domain};
use crate::error::{Error, Result};
use crate::num::{self, C64};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Largest scale for which polydiscs are built.
pub const EPS_MAX: f64 = 1.0;
/// Smallest scale probed by the pseudodistance bisection.
pub const EPS_MIN: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryOptions {
    /// Samples on the circle `|lambda| = t` before golden-section refinement.
    pub circle_samples: usize,
    /// Trial directions per complex dimension pair in the extremal search.
    pub sphere_directions: usize,
    /// Relative tolerance of the `tau` bisection.
    pub tau_rtol: f64,
    /// Band constants used by the invariant checks (doubling, decomposition, stability).
    pub band: [f64; 3],
}

impl Default for GeometryOptions {
    fn default() -> Self {
        Self {
            circle_samples: 64,
            sphere_directions: 256,
            tau_rtol: 1e-11,
            band: [4.0, 8.0, 10.0],
        }
    }
}

/// `|r(z + lambda v) - r(z)|` along a complex line, without allocation for
/// the built-in domains.
struct Line<'a> {
    domain: &'a Domain,
    z: &'a [C64],
    v: &'a [C64],
    r0: f64,
    buf: std::cell::RefCell<Vec<C64>>,
}

impl<'a> Line<'a> {
    fn new(domain: &'a Domain, z: &'a [C64], v: &'a [C64]) -> Result<Self> {
        let r0 = domain.r_analytic(z)?;
        Ok(Self {
            domain,
            z,
            v,
            r0,
            buf: std::cell::RefCell::new(vec![C64::new(0.0, 0.0); z.len()]),
        })
    }

    fn value(&self, lam: C64) -> Result<f64> {
        if self.domain.kind() != crate::domain::DomainKind::Custom {
            let mut s = -1.0;
            for ((zj, vj), &m) in self.z.iter().zip(self.v).zip(self.domain.exponents()) {
                s += (zj + lam * vj).norm_sqr().powi(m as i32);
            }
            return Ok((s - self.r0).abs());
        }
        let mut b = self.buf.borrow_mut();
        for j in 0..self.z.len() {
            b[j] = self.z[j] + lam * self.v[j];
        }
        Ok((self.domain.r_analytic(&b)? - self.r0).abs())
    }

    /// Maximum over the circle `|lambda| = t`.
    fn circle_max(&self, t: f64, samples: usize) -> Result<f64> {
        let mut best = (f64::NEG_INFINITY, 0.0);
        for th in num::trapezoid_angles(samples, 0.0) {
            let f = self.value(C64::from_polar(t, th))?;
            if f > best.0 {
                best = (f, th);
            }
        }
        let h = 2.0 * PI / samples as f64;
        let (mut a, mut b) = (best.1 - h, best.1 + h);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = b - g * (b - a);
        let mut x2 = a + g * (b - a);
        let mut f1 = self.value(C64::from_polar(t, x1))?;
        let mut f2 = self.value(C64::from_polar(t, x2))?;
        while b - a > 1e-9 {
            if f1 < f2 {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = self.value(C64::from_polar(t, x2))?;
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = self.value(C64::from_polar(t, x1))?;
            }
        }
        Ok(best.0.max(f1).max(f2))
    }
}

/// `tau(z, v, eps) = sup{t : |r(z + lambda v) - r(z)| < eps for |lambda| < t}`
/// for the analytic defining function.
pub fn tau(domain: &Domain, z: &[C64], v: &[C64], eps: f64) -> Result<f64> {
    tau_with(domain, z, v, eps, &GeometryOptions::default())
}

pub fn tau_with(
    domain: &Domain,
    z: &[C64],
    v: &[C64],
    eps: f64,
    opts: &GeometryOptions,
) -> Result<f64> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {eps}")));
    }
    if v.len() != domain.dim() {
        return Err(Error::InvalidInput("direction has the wrong dimension".into()));
    }
    let vn = num::norm(v);
    if vn == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let line = Line::new(domain, z, v)?;
    let f = |t: f64| line.circle_max(t, opts.circle_samples);
    // bracket the first crossing by doubling / halving from a sqrt guess
    let mut t = eps.sqrt() / vn;
    let (mut lo, mut hi);
    if f(t)? >= eps {
        hi = t;
        let mut k = 0;
        loop {
            t *= 0.5;
            k += 1;
            if f(t)? < eps {
                lo = t;
                break;
            }
            if k > 200 {
                return Err(Error::NoConvergence { what: "tau bracket", iterations: k, lo: 0.0, hi });
            }
            hi = t;
        }
    } else {
        lo = t;
        let mut k = 0;
        loop {
            t *= 2.0;
            k += 1;
            if f(t)? >= eps {
                hi = t;
                break;
            }
            if k > 200 {
                return Err(Error::NoConvergence { what: "tau bracket", iterations: k, lo, hi: t });
            }
            lo = t;
        }
    }
    let mut it = 0;
    while hi - lo > opts.tau_rtol * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid)? < eps {
            lo = mid;
        } else {
            hi = mid;
        }
        it += 1;
        if it > 200 {
            return Err(Error::NoConvergence { what: "tau bisection", iterations: it, lo, hi });
        }
    }
    Ok(0.5 * (lo + hi))
}

/// An `eps`-extremal orthonormal basis with its radii.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremalFrame {
    pub center: Vec<C64>,
    pub epsilon: f64,
    pub vectors: Vec<Vec<C64>>,
    pub radii: Vec<f64>,
}

impl ExtremalFrame {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Coordinates `zeta*_j = <p - center, w*_j>`.
    pub fn coordinates(&self, p: &[C64]) -> Vec<C64> {
        let d = num::sub(p, &self.center);
        self.vectors.iter().map(|w| num::hdot(w, &d)).collect()
    }

    /// `center + sum zeta*_j w*_j`.
    pub fn point(&self, coords: &[C64]) -> Vec<C64> {
        let mut out = self.center.clone();
        for (w, &s) in self.vectors.iter().zip(coords) {
            for (o, wi) in out.iter_mut().zip(w) {
                *o += s * wi;
            }
        }
        out
    }

    /// Maximum deviation from Hermitian orthonormality.
    pub fn orthonormality_error(&self) -> f64 {
        let mut e: f64 = 0.0;
        for (a, wa) in self.vectors.iter().enumerate() {
            for (b, wb) in self.vectors.iter().enumerate() {
                let target = if a == b { 1.0 } else { 0.0 };
                e = e.max((num::hdot(wa, wb) - C64::new(target, 0.0)).norm());
            }
        }
        e
    }

    /// Components `v*_j` of `v` in the frame.
    pub fn components(&self, v: &[C64]) -> Vec<C64> {
        self.vectors.iter().map(|w| num::hdot(w, v)).collect()
    }
}

/// Greedy extremal basis: the normal first, then successive maximizers of
/// `tau` over the orthogonal complement.
pub fn extremal_basis(domain: &Domain, z: &[C64], eps: f64) -> Result<ExtremalFrame> {
    extremal_basis_with(domain, z, eps, &GeometryOptions::default())
}

pub fn extremal_basis_with(
    domain: &Domain,
    z: &[C64],
    eps: f64,
    opts: &GeometryOptions,
) -> Result<ExtremalFrame> {
    let n = domain.dim();
    let w1 = domain.unit_normal(z)?;
    let mut vectors = vec![w1];
    let mut radii = vec![tau_with(domain, z, &vectors[0], eps, opts)?];
    while vectors.len() < n {
        let comp = num::complement_basis(n, &vectors);
        let k = comp.len();
        let lift = |c: &[C64]| -> Vec<C64> {
            let mut out = vec![C64::new(0.0, 0.0); n];
            for (ci, b) in c.iter().zip(&comp) {
                for (o, bi) in out.iter_mut().zip(b) {
                    *o += ci * bi;
                }
            }
            out
        };
        let (w, t) = if k == 1 {
            let w = comp[0].clone();
            let t = tau_with(domain, z, &w, eps, opts)?;
            (w, t)
        } else {
            let count = opts.sphere_directions * (k - 1);
            let mut best: Option<(Vec<C64>, f64)> = None;
            for c in num::sphere_points(count, k, 7) {
                let w = lift(&c);
                let t = tau_with(domain, z, &w, eps, opts)?;
                if best.as_ref().is_none_or(|b| t > b.1) {
                    best = Some((c, t));
                }
            }
            let (mut c, mut t) = best.expect("at least one direction");
            // pattern search over the real coordinates of the complement
            let mut step = 0.1;
            while step > 1e-4 {
                let mut improved = false;
                for a in 0..2 * k {
                    for sgn in [1.0, -1.0] {
                        let mut trial = c.clone();
                        let delta = if a % 2 == 0 { C64::new(sgn * step, 0.0) } else { C64::new(0.0, sgn * step) };
                        trial[a / 2] += delta;
                        let Some(trial) = num::normalized(&trial) else { continue };
                        let tt = tau_with(domain, z, &lift(&trial), eps, opts)?;
                        if tt > t * (1.0 + 1e-9) {
                            c = trial;
                            t = tt;
                            improved = true;
                        }
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
            (lift(&c), t)
        };
        let w = num::orthogonalize(&w, &vectors).ok_or_else(|| {
            Error::Singular("extremal direction collapsed onto earlier vectors".into())
        })?;
        vectors.push(w);
        radii.push(t);
    }
    // radii are re-evaluated and the tangential part sorted non-increasing
    let mut tail: Vec<(Vec<C64>, f64)> = vectors
        .drain(1..)
        .map(|w| {
            let t = tau_with(domain, z, &w, eps, opts);
            t.map(|t| (w, t))
        })
        .collect::<Result<_>>()?;
    tail.sort_by(|a, b| b.1.total_cmp(&a.1));
    radii.truncate(1);
    for (w, t) in tail {
        vectors.push(w);
        radii.push(t);
    }
    Ok(ExtremalFrame {
        center: z.to_vec(),
        epsilon: eps,
        vectors,
        radii,
    })
}

/// The McNeal polydisc `{center + sum zeta*_j w*_j : |zeta*_j| < tau_j}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polydisc {
    pub frame: ExtremalFrame,
}

impl Polydisc {
    pub fn new(domain: &Domain, z: &[C64], eps: f64) -> Result<Self> {
        Ok(Self {
            frame: extremal_basis(domain, z, eps)?,
        })
    }

    /// `max_j |zeta*_j| / tau_j`; the polydisc is the set where this is `< 1`.
    pub fn gauge(&self, p: &[C64]) -> f64 {
        self.frame
            .coordinates(p)
            .iter()
            .zip(&self.frame.radii)
            .map(|(c, t)| c.norm() / t)
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, p: &[C64]) -> bool {
        self.gauge(p) < 1.0
    }

    /// Membership in the dilate `s * P`.
    pub fn contains_scaled(&self, p: &[C64], s: f64) -> bool {
        self.gauge(p) < s
    }

    /// Exact Euclidean volume `prod pi tau_j^2`.
    pub fn volume(&self) -> f64 {
        polydisc_volume(&self.frame)
    }

    /// Uniform sample of the polydisc scaled by `s`.
    pub fn sample<R: rand::Rng>(&self, rng: &mut R, s: f64) -> Vec<C64> {
        let coords: Vec<C64> = self
            .frame
            .radii
            .iter()
            .map(|&t| {
                let rad = s * t * rng.random::<f64>().sqrt();
                C64::from_polar(rad, 2.0 * PI * rng.random::<f64>())
            })
            .collect();
        self.frame.point(&coords)
    }
}

pub fn polydisc_volume(frame: &ExtremalFrame) -> f64 {
    frame.radii.iter().map(|t| PI * t * t).product()
}

/// Surrogate for the boundary cap area `sigma(P_eps(z0) cap bD)`:
/// `prod_{j >= 2} tau_j^2`.
pub fn cap_area(domain: &Domain, z0: &[C64], eps: f64) -> Result<f64> {
    let f = extremal_basis(domain, z0, eps)?;
    Ok(cap_area_of(&f))
}

pub fn cap_area_of(frame: &ExtremalFrame) -> f64 {
    frame.radii[1..].iter().map(|t| t * t).product()
}

/// Largest sampled `|d^{alpha+beta} r(z)| prod tau_j^{alpha_j+beta_j} / eps`
/// over `z` in `P_eps(zeta)`, derivatives taken in the extremal coordinates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DerivativeBound {
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
    pub epsilon: f64,
    pub samples: usize,
    pub max_ratio: f64,
}

/// `alpha` counts holomorphic and `beta` antiholomorphic derivatives;
/// `|alpha| + |beta|` must be 1 or 2. Uses the analytic defining function.
pub fn derivative_bound_check(
    domain: &Domain,
    zeta: &[C64],
    eps: f64,
    alpha: &[usize],
    beta: &[usize],
    samples: usize,
    seed: u64,
) -> Result<DerivativeBound> {
    let n = domain.dim();
    if alpha.len() != n || beta.len() != n {
        return Err(Error::InvalidInput("multi-index length must equal the dimension".into()));
    }
    let order: usize = alpha.iter().chain(beta).sum();
    if !(1..=2).contains(&order) {
        return Err(Error::InvalidInput(format!("derivative order {order} not in {{1, 2}}")));
    }
    let pd = Polydisc::new(domain, zeta, eps)?;
    let v = &pd.frame.vectors;
    let scale: f64 = (0..n)
        .map(|j| pd.frame.radii[j].powi((alpha[j] + beta[j]) as i32))
        .product::<f64>()
        / eps;
    // indices of the derivatives, holomorphic ones first
    let holo: Vec<usize> = (0..n).flat_map(|j| std::iter::repeat_n(j, alpha[j])).collect();
    let anti: Vec<usize> = (0..n).flat_map(|j| std::iter::repeat_n(j, beta[j])).collect();
    let mut rng = num::rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let z = pd.sample(&mut rng, 1.0);
        let jet = domain.jet(DefiningForm::Analytic, &z)?;
        let g = |a: &[C64]| num::bdot(&jet.grad, a);
        let value = match (holo.as_slice(), anti.as_slice()) {
            ([j], []) => g(&v[*j]),
            ([], [k]) => g(&v[*k]).conj(),
            ([j], [k]) => num::bdot(&v[*j], &num::mat_vec(&jet.levi, &num::conj_vec(&v[*k]))),
            ([j, k], []) => num::bdot(&v[*j], &num::mat_vec(&jet.holo, &v[*k])),
            ([], [j, k]) => num::bdot(&v[*j], &num::mat_vec(&jet.holo, &v[*k])).conj(),
            _ => unreachable!("order checked above"),
        };
        worst = worst.max(value.norm() * scale);
    }
    Ok(DerivativeBound { alpha: alpha.to_vec(), beta: beta.to_vec(), epsilon: eps, samples, max_ratio: worst })
}

/// `k(z, v) = d(z) / tau(z, v, d(z))`, with `k(z, 0) = 0`.
pub fn knorm(domain: &Domain, z: &[C64], v: &[C64]) -> Result<f64> {
    if num::norm(v) == 0.0 {
        return Ok(0.0);
    }
    let d = domain.d(DefiningForm::Analytic, z)?;
    if d == 0.0 {
        return Err(Error::TooCloseToBoundary(0.0));
    }
    Ok(d / tau(domain, z, v, d)?)
}

/// `delta(z, zeta) = inf{eps : zeta in P_eps(z)}` by bisection on `log eps`
/// over `[EPS_MIN, EPS_MAX]`; returns `f64::INFINITY` if `zeta` is outside
/// `P_{EPS_MAX}(z)`.
pub fn pseudodistance(domain: &Domain, z: &[C64], zeta: &[C64]) -> Result<f64> {
    if num::norm(&num::sub(z, zeta)) == 0.0 {
        return Ok(0.0);
    }
    let inside = |eps: f64| -> Result<bool> { Ok(Polydisc::new(domain, z, eps)?.contains(zeta)) };
    if !inside(EPS_MAX)? {
        return Ok(f64::INFINITY);
    }
    if inside(EPS_MIN)? {
        return Ok(EPS_MIN);
    }
    let (mut lo, mut hi) = (EPS_MIN.ln(), EPS_MAX.ln());
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if inside(mid.exp())? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Shell {
    pub level: usize,
    pub inner_scale: f64,
    pub outer: Polydisc,
}

/// Covering of `P_{eps0}(zeta0)` by the core `P_d` and the shells
/// `P_{2^k d} \ c P_{2^k d}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolyannulusCover {
    pub base: Vec<C64>,
    pub eps0: f64,
    pub d: f64,
    pub core: Polydisc,
    pub shells: Vec<Shell>,
    pub k0: usize,
}

/// Where a point of the covered polydisc lands.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoverCell {
    Core,
    Shell(usize),
}

impl PolyannulusCover {
    pub fn locate(&self, p: &[C64]) -> Option<CoverCell> {
        if self.core.contains(p) {
            return Some(CoverCell::Core);
        }
        self.shells
            .iter()
            .find(|s| s.outer.contains(p) && !s.outer.contains_scaled(p, s.inner_scale))
            .map(|s| CoverCell::Shell(s.level))
    }

    /// Fraction of uniform samples of `P_{eps0}` that land in the core or a shell.
    pub fn coverage_ratio(&self, domain: &Domain, samples: usize, seed: u64) -> Result<f64> {
        let outer = Polydisc::new(domain, &self.base, self.eps0)?;
        let mut rng = num::rng(seed);
        let hit = (0..samples)
            .filter(|_| self.locate(&outer.sample(&mut rng, 1.0)).is_some())
            .count();
        Ok(hit as f64 / samples as f64)
    }
}

pub fn polyannulus_cover(domain: &Domain, zeta0: &[C64], eps0: f64) -> Result<PolyannulusCover> {
    polyannulus_cover_with(domain, zeta0, eps0, 0.25)
}

pub fn polyannulus_cover_with(
    domain: &Domain,
    zeta0: &[C64],
    eps0: f64,
    inner: f64,
) -> Result<PolyannulusCover> {
    let d = domain.d(DefiningForm::Analytic, zeta0)?;
    if d == 0.0 {
        return Err(Error::TooCloseToBoundary(0.0));
    }
    let core = Polydisc::new(domain, zeta0, d)?;
    let k0 = if eps0 <= d {
        0
    } else {
        (eps0 / d).log2().ceil().max(0.0) as usize
    };
    let mut shells = Vec::new();
    if k0 > 0 {
        for k in 0..=k0 {
            shells.push(Shell {
                level: k,
                inner_scale: inner,
                outer: Polydisc::new(domain, zeta0, d * 2f64.powi(k as i32))?,
            });
        }
    }
    Ok(PolyannulusCover {
        base: zeta0.to_vec(),
        eps0,
        d,
        core,
        shells,
        k0,
    })
}

/// Contact order of the line through `z` in direction `v`: `1 / slope` of
/// `log tau` against `log eps` over a geometric ladder.
pub fn contact_order_estimate(domain: &Domain, z: &[C64], v: &[C64]) -> Result<f64> {
    let eps: Vec<f64> = (0..8).map(|k| 1e-3 * 0.5f64.powi(2 * k)).collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &e in &eps {
        xs.push(e.ln());
        ys.push(tau(domain, z, v, e)?.ln());
    }
    let (slope, _) = num::linear_fit(&xs, &ys)
        .ok_or_else(|| Error::Evaluation("degenerate contact-order regression".into()))?;
    if !(slope > 0.0) {
        return Err(Error::Evaluation(format!("non-positive slope {slope}")));
    }
    Ok(1.0 / slope)
}

/// CSV rows `(z_re..., z_im..., epsilon, j, tau_j, w_j components)`.
pub fn frame_csv_rows(frame: &ExtremalFrame) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (j, (w, t)) in frame.vectors.iter().zip(&frame.radii).enumerate() {
        let mut row: Vec<String> = frame.center.iter().map(|x| x.re.to_string()).collect();
        row.extend(frame.center.iter().map(|x| x.im.to_string()));
        row.push(frame.epsilon.to_string());
        row.push((j + 1).to_string());
        row.push(t.to_string());
        for x in w {
            row.push(x.re.to_string());
            row.push(x.im.to_string());
        }
        rows.push(row);
    }
    rows
}

pub fn frame_csv_header(n: usize) -> Vec<String> {
    let mut h: Vec<String> = (1..=n).map(|j| format!("z{j}_re")).collect();
    h.extend((1..=n).map(|j| format!("z{j}_im")));
    h.extend(["epsilon", "j", "tau_j"].map(String::from));
    for k in 1..=n {
        h.push(format!("w{k}_re"));
        h.push(format!("w{k}_im"));
    }
    h
}
