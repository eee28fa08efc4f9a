//! Smooth forms, smoothed Lelong currents of divisors, the Blaschke integral
//! and Carleson norms of measures and currents.

use crate::domain::{DefiningForm, Domain};
use crate::error::{Error, Result};
use crate::geometry::{self, Polydisc};
use crate::metric::MetricModel;
use crate::num::{self, C64, CMat};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

/// Coefficients of a form at a point.
#[derive(Clone, Debug, PartialEq)]
pub enum Coefficients {
    Function(C64),
    /// `sum a_j dz_j`
    Holomorphic(Vec<C64>),
    /// `sum b_j d conj(z_j)`
    Antiholomorphic(Vec<C64>),
    /// `i sum Theta_jk dz_j ^ d conj(z_k)`
    Mixed(CMat),
}

impl Coefficients {
    pub fn bidegree(&self) -> (usize, usize) {
        match self {
            Self::Function(_) => (0, 0),
            Self::Holomorphic(_) => (1, 0),
            Self::Antiholomorphic(_) => (0, 1),
            Self::Mixed(_) => (1, 1),
        }
    }

    /// Frame pairing: `f`, `sum a_j u_j`, `sum b_j conj(u_j)` or
    /// `sum u_j Theta_jk conj(v_k)`.
    pub fn pair(&self, vs: &[&[C64]]) -> C64 {
        match self {
            Self::Function(f) => *f,
            Self::Holomorphic(a) => num::bdot(a, vs[0]),
            Self::Antiholomorphic(b) => num::bdot(b, &num::conj_vec(vs[0])),
            Self::Mixed(t) => {
                let tv = num::mat_vec(t, &num::conj_vec(vs[1]));
                num::bdot(vs[0], &tv)
            }
        }
    }

    /// Value on real tangent vectors, the form seen as a real multilinear map
    /// on `R^{2n}`.
    pub fn eval(&self, xs: &[&[C64]]) -> C64 {
        match self {
            Self::Mixed(t) => {
                let a = num::bdot(xs[0], &num::mat_vec(t, &num::conj_vec(xs[1])));
                C64::new(-2.0 * a.im, 0.0)
            }
            other => other.pair(xs),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let k = C64::new(c, 0.0);
        match self {
            Self::Function(f) => Self::Function(f * k),
            Self::Holomorphic(a) => Self::Holomorphic(num::scale(a, k)),
            Self::Antiholomorphic(b) => Self::Antiholomorphic(num::scale(b, k)),
            Self::Mixed(t) => Self::Mixed(t * k),
        }
    }

    pub fn norm(&self) -> f64 {
        match self {
            Self::Function(f) => f.norm(),
            Self::Holomorphic(a) | Self::Antiholomorphic(a) => num::norm(a),
            Self::Mixed(t) => num::frobenius(t),
        }
    }
}

/// A smooth form field on a domain of `C^n`.
pub trait FormField: Send + Sync {
    fn dim(&self) -> usize;
    fn bidegree(&self) -> (usize, usize);
    fn coefficients(&self, z: &[C64]) -> Result<Coefficients>;
}

/// The zero form of a given bidegree.
#[derive(Clone, Debug)]
pub struct ZeroForm {
    pub dim: usize,
    pub bidegree: (usize, usize),
}

impl FormField for ZeroForm {
    fn dim(&self) -> usize {
        self.dim
    }
    fn bidegree(&self) -> (usize, usize) {
        self.bidegree
    }
    fn coefficients(&self, _z: &[C64]) -> Result<Coefficients> {
        let n = self.dim;
        let zero = C64::new(0.0, 0.0);
        Ok(match self.bidegree {
            (0, 0) => Coefficients::Function(zero),
            (1, 0) => Coefficients::Holomorphic(vec![zero; n]),
            (0, 1) => Coefficients::Antiholomorphic(vec![zero; n]),
            (1, 1) => Coefficients::Mixed(CMat::zeros(n, n)),
            other => return Err(Error::Unsupported(format!("bidegree {other:?}"))),
        })
    }
}

/// `sum c_k theta_k` over forms of equal bidegree.
#[derive(Clone)]
pub struct LinearCombination {
    pub terms: Vec<(f64, Arc<dyn FormField>)>,
}

impl FormField for LinearCombination {
    fn dim(&self) -> usize {
        self.terms[0].1.dim()
    }
    fn bidegree(&self) -> (usize, usize) {
        self.terms[0].1.bidegree()
    }
    fn coefficients(&self, z: &[C64]) -> Result<Coefficients> {
        let mut acc: Option<Coefficients> = None;
        for (c, f) in &self.terms {
            let v = f.coefficients(z)?.scaled(*c);
            acc = Some(match (acc, v) {
                (None, v) => v,
                (Some(Coefficients::Function(a)), Coefficients::Function(b)) => Coefficients::Function(a + b),
                (Some(Coefficients::Holomorphic(a)), Coefficients::Holomorphic(b)) => Coefficients::Holomorphic(num::add(&a, &b)),
                (Some(Coefficients::Antiholomorphic(a)), Coefficients::Antiholomorphic(b)) => {
                    Coefficients::Antiholomorphic(num::add(&a, &b))
                }
                (Some(Coefficients::Mixed(a)), Coefficients::Mixed(b)) => Coefficients::Mixed(a + b),
                _ => return Err(Error::InvalidInput("mixed bidegrees in a linear combination".into())),
            });
        }
        acc.ok_or_else(|| Error::InvalidInput("empty linear combination".into()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coef: C64,
    pub powers: Vec<u32>,
}

/// Holomorphic polynomial in `n` variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub dim: usize,
    pub terms: Vec<Term>,
}

impl Polynomial {
    /// Parses expressions such as `z1`, `z1*z2 - 0.5`, `(1+2i)*z2^3 + z1`.
    pub fn parse(src: &str, dim: usize) -> Result<Self> {
        let bad = |m: &str| Error::InvalidInput(format!("polynomial `{src}`: {m}"));
        let s: String = src.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() {
            return Err(bad("empty"));
        }
        // split at top-level + and - (not inside parentheses, not after 'e')
        let mut pieces: Vec<(f64, String)> = Vec::new();
        let mut depth = 0;
        let mut cur = String::new();
        let mut sign = 1.0;
        let chars: Vec<char> = s.chars().collect();
        for (i, &ch) in chars.iter().enumerate() {
            match ch {
                '(' => {
                    depth += 1;
                    cur.push(ch);
                }
                ')' => {
                    depth -= 1;
                    cur.push(ch);
                }
                '+' | '-' if depth == 0 && !(i > 0 && (chars[i - 1] == 'e' || chars[i - 1] == 'E') && cur.chars().any(|c| c.is_ascii_digit()) && !cur.contains('z')) => {
                    if !cur.is_empty() {
                        pieces.push((sign, std::mem::take(&mut cur)));
                    } else if i != 0 && !pieces.is_empty() {
                        return Err(bad("dangling operator"));
                    }
                    sign = if ch == '-' { -1.0 } else { 1.0 };
                }
                _ => cur.push(ch),
            }
        }
        if depth != 0 {
            return Err(bad("unbalanced parentheses"));
        }
        if cur.is_empty() {
            return Err(bad("dangling operator"));
        }
        pieces.push((sign, cur));
        let mut terms = Vec::new();
        for (sign, piece) in pieces {
            let mut coef = C64::new(sign, 0.0);
            let mut powers = vec![0u32; dim];
            for factor in piece.split('*') {
                if factor.is_empty() {
                    return Err(bad("empty factor"));
                }
                if let Some(rest) = factor.strip_prefix('z') {
                    let (idx, pow) = match rest.split_once('^') {
                        Some((a, b)) => (a, b.parse::<u32>().map_err(|_| bad("bad exponent"))?),
                        None => (rest, 1),
                    };
                    let k: usize = idx.parse().map_err(|_| bad("bad variable index"))?;
                    if k == 0 || k > dim {
                        return Err(bad("variable index out of range"));
                    }
                    powers[k - 1] += pow;
                } else {
                    let inner = factor.trim_start_matches('(').trim_end_matches(')');
                    let c = num::parse_complex(inner).ok_or_else(|| bad("bad coefficient"))?;
                    coef *= c;
                }
            }
            terms.push(Term { coef, powers });
        }
        Ok(Self { dim, terms })
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coef.norm() == 0.0)
    }

    pub fn eval(&self, z: &[C64]) -> C64 {
        self.terms
            .iter()
            .map(|t| {
                t.powers
                    .iter()
                    .zip(z)
                    .fold(t.coef, |acc, (&p, zj)| acc * zj.powu(p))
            })
            .sum()
    }

    pub fn gradient(&self, z: &[C64]) -> Vec<C64> {
        let mut g = vec![C64::new(0.0, 0.0); self.dim];
        for t in &self.terms {
            for j in 0..self.dim {
                if t.powers[j] == 0 {
                    continue;
                }
                let mut v = t.coef * t.powers[j] as f64;
                for (k, zk) in z.iter().enumerate() {
                    let p = if k == j { t.powers[k] - 1 } else { t.powers[k] };
                    v *= zk.powu(p);
                }
                g[j] += v;
            }
        }
        g
    }

    /// `(a, b)` with `f = sum a_j z_j + b` when `f` is affine.
    pub fn affine_parts(&self) -> Option<(Vec<C64>, C64)> {
        let mut a = vec![C64::new(0.0, 0.0); self.dim];
        let mut b = C64::new(0.0, 0.0);
        for t in &self.terms {
            let deg: u32 = t.powers.iter().sum();
            match deg {
                0 => b += t.coef,
                1 => {
                    let j = t.powers.iter().position(|&p| p == 1).expect("degree one");
                    a[j] += t.coef;
                }
                _ => return None,
            }
        }
        Some((a, b))
    }
}

/// A divisor `{f = 0}` with multiplicity weight and smoothing scale `s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivisorModel {
    pub polynomial: Polynomial,
    pub weight: f64,
    pub s: f64,
}

/// On-disk form `{"polynomial": "z1", "dimension": 2, "weight": 1, "s": 0.05}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DivisorFile {
    pub polynomial: String,
    pub dimension: usize,
    #[serde(default = "one")]
    pub weight: f64,
    #[serde(default = "default_s")]
    pub s: f64,
}

fn one() -> f64 {
    1.0
}

fn default_s() -> f64 {
    DEFAULT_S
}

/// Default smoothing scale of Lelong currents.
pub const DEFAULT_S: f64 = 0.05;

impl DivisorModel {
    pub fn new(polynomial: Polynomial, weight: f64, s: f64) -> Result<Self> {
        if polynomial.is_zero() {
            return Err(Error::InvalidInput("the zero polynomial has no divisor".into()));
        }
        if !(s > 0.0) {
            return Err(Error::InvalidInput("smoothing scale must be positive".into()));
        }
        Ok(Self { polynomial, weight, s })
    }

    pub fn parse(src: &str, dim: usize, weight: f64, s: f64) -> Result<Self> {
        Self::new(Polynomial::parse(src, dim)?, weight, s)
    }

    pub fn from_file(f: &DivisorFile) -> Result<Self> {
        Self::parse(&f.polynomial, f.dimension, f.weight, f.s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f: DivisorFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::from_file(&f)
    }

    pub fn dim(&self) -> usize {
        self.polynomial.dim
    }

    pub fn with_s(&self, s: f64) -> Self {
        Self { s, ..self.clone() }
    }

    /// Potential `weight * log(|f|^2 + s^2)`.
    pub fn potential(&self, z: &[C64]) -> f64 {
        self.weight * (self.polynomial.eval(z).norm_sqr() + self.s * self.s).ln()
    }

    /// `d Psi / d z_j = weight * conj(f) f_j / (|f|^2 + s^2)`.
    pub fn potential_gradient(&self, z: &[C64]) -> Vec<C64> {
        let f = self.polynomial.eval(z);
        let q = f.norm_sqr() + self.s * self.s;
        self.polynomial
            .gradient(z)
            .iter()
            .map(|g| f.conj() * g * (self.weight / q))
            .collect()
    }

    /// `Theta_jk = weight * s^2 f_j conj(f_k) / (|f|^2 + s^2)^2`.
    pub fn theta(&self, z: &[C64]) -> CMat {
        let f = self.polynomial.eval(z);
        let g = self.polynomial.gradient(z);
        let q = f.norm_sqr() + self.s * self.s;
        let k = self.weight * self.s * self.s / (q * q);
        let n = self.dim();
        CMat::from_fn(n, n, |j, l| g[j] * g[l].conj() * k)
    }
}

/// The smoothed Lelong current `i ddbar log(|f|^2 + s^2)`.
#[derive(Clone, Debug)]
pub struct LelongField {
    pub divisor: DivisorModel,
}

pub fn lelong_smoothed(divisor: &DivisorModel) -> LelongField {
    LelongField {
        divisor: divisor.clone(),
    }
}

impl FormField for LelongField {
    fn dim(&self) -> usize {
        self.divisor.dim()
    }
    fn bidegree(&self) -> (usize, usize) {
        (1, 1)
    }
    fn coefficients(&self, z: &[C64]) -> Result<Coefficients> {
        Ok(Coefficients::Mixed(self.divisor.theta(z)))
    }
}

/// Cutoff `chi(d)`: 1 for `d <= eps0/2`, 0 for `d >= eps0`, with derivatives.
pub fn boundary_cutoff(d: f64, eps0: f64) -> (f64, f64, f64) {
    let h = 0.5 * eps0;
    let (s, s1, s2) = num::smooth_step((d - h) / h);
    (1.0 - s, -s1 / h, -s2 / (h * h))
}

/// `i ddbar (chi(d) Psi)` with `d = 1 - p` the gauge distance: closed, equal
/// to the Lelong field where `d <= eps0/2` and zero where `d >= eps0`.
#[derive(Clone, Debug)]
pub struct LocalizedLelong {
    pub divisor: DivisorModel,
    pub domain: Domain,
    pub eps0: f64,
}

impl LocalizedLelong {
    pub fn new(divisor: &DivisorModel, domain: &Domain, eps0: f64) -> Self {
        Self {
            divisor: divisor.clone(),
            domain: domain.clone(),
            eps0,
        }
    }

    /// The localized potential `chi(d) Psi`.
    pub fn potential(&self, z: &[C64]) -> Result<f64> {
        let d = -self.domain.eval_r(z)?;
        let (chi, _, _) = boundary_cutoff(d, self.eps0);
        Ok(if chi == 0.0 { 0.0 } else { chi * self.divisor.potential(z) })
    }
}

impl FormField for LocalizedLelong {
    fn dim(&self) -> usize {
        self.divisor.dim()
    }
    fn bidegree(&self) -> (usize, usize) {
        (1, 1)
    }
    fn coefficients(&self, z: &[C64]) -> Result<Coefficients> {
        let n = self.dim();
        let p = self.domain.gauge(z)?;
        let d = 1.0 - p;
        let (chi, c1, c2) = boundary_cutoff(d, self.eps0);
        if chi == 0.0 && c1 == 0.0 {
            return Ok(Coefficients::Mixed(CMat::zeros(n, n)));
        }
        let theta = self.divisor.theta(z);
        if c1 == 0.0 && c2 == 0.0 {
            return Ok(Coefficients::Mixed(theta * C64::new(chi, 0.0)));
        }
        let jet = self.domain.jet(DefiningForm::Gauge, z)?;
        let psi = self.divisor.potential(z);
        let dpsi = self.divisor.potential_gradient(z);
        let dchi: Vec<C64> = jet.grad.iter().map(|pj| -c1 * pj).collect();
        let out = CMat::from_fn(n, n, |j, k| {
            let chi_jk = c2 * jet.grad[j] * jet.grad[k].conj() - c1 * jet.levi[(j, k)];
            theta[(j, k)] * chi + dchi[j] * dpsi[k].conj() + dpsi[j] * dchi[k].conj() + chi_jk * psi
        });
        Ok(Coefficients::Mixed(out))
    }
}

/// Directional derivative of a form's real evaluation by central differences.
fn directional<F: FormField + ?Sized>(
    form: &F,
    z: &[C64],
    dir: &[C64],
    args: &[&[C64]],
    h: f64,
) -> Result<C64> {
    let p = form.coefficients(&num::axpy(z, C64::new(h, 0.0), dir))?.eval(args);
    let m = form.coefficients(&num::axpy(z, C64::new(-h, 0.0), dir))?.eval(args);
    Ok((p - m) / (2.0 * h))
}

/// `d theta (X, Y, W)` for a 2-form by central differences, with the sum of
/// the absolute values of the three terms as the scale.
pub fn exterior_derivative_2form<F: FormField + ?Sized>(
    form: &F,
    z: &[C64],
    x: &[C64],
    y: &[C64],
    w: &[C64],
    h: f64,
) -> Result<(f64, f64)> {
    let a = directional(form, z, x, &[y, w], h)?;
    let b = directional(form, z, y, &[x, w], h)?;
    let c = directional(form, z, w, &[x, y], h)?;
    let v = a - b + c;
    Ok((v.norm(), a.norm() + b.norm() + c.norm()))
}

/// A weighted point cloud.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub points: Vec<Vec<C64>>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Vec<C64>>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::InvalidInput("points and weights differ in length".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
        }
        Ok(Self { points, weights })
    }

    pub fn atom(z: Vec<C64>, w: f64) -> Self {
        Self {
            points: vec![z],
            weights: vec![w],
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            points: self.points.clone(),
            weights: self.weights.iter().map(|w| w * c).collect(),
        }
    }

    /// CSV with columns `z1_re, z1_im, ..., weight`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let n = self.points.first().map_or(0, |p| p.len());
        let mut header: Vec<String> = Vec::new();
        for j in 1..=n {
            header.push(format!("z{j}_re"));
            header.push(format!("z{j}_im"));
        }
        header.push("weight".into());
        w.write_record(&header)?;
        for (p, wt) in self.points.iter().zip(&self.weights) {
            let mut row: Vec<String> = Vec::new();
            for x in p {
                row.push(x.re.to_string());
                row.push(x.im.to_string());
            }
            row.push(wt.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|_| Error::InvalidInput(format!("bad number `{s}`"))))
                .collect::<Result<_>>()?;
            if vals.len() < 3 || vals.len() % 2 == 0 {
                return Err(Error::InvalidInput("measure rows need 2n+1 columns".into()));
            }
            let n = (vals.len() - 1) / 2;
            points.push((0..n).map(|j| C64::new(vals[2 * j], vals[2 * j + 1])).collect());
            weights.push(vals[2 * n]);
        }
        Self::new(points, weights)
    }
}

/// Probe budget for Carleson suprema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlesonBudget {
    pub boundary_points: usize,
    pub levels: usize,
    pub atom_probes: usize,
    pub seed: u32,
}

impl Default for CarlesonBudget {
    fn default() -> Self {
        Self {
            boundary_points: 200,
            levels: 12,
            atom_probes: 200,
            seed: 17,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CarlesonReport {
    pub norm: f64,
    pub argsup_point: Vec<C64>,
    pub argsup_epsilon: f64,
    pub probes: usize,
    pub atoms: usize,
    /// Cap areas are the product-of-radii surrogate.
    pub surrogate_area: bool,
    /// For currents: the sup is taken over frame index tuples only.
    pub frame_max: bool,
}

struct Probe {
    polydisc: Polydisc,
    cap: f64,
    radius: f64,
}

/// Boundary probes `(z0, eps)`; the ladder part is nested in the budget.
pub struct ProbeSet {
    probes: Vec<Probe>,
}

impl ProbeSet {
    pub fn new(domain: &Domain, budget: &CarlesonBudget, seeds: &[Vec<C64>]) -> Result<Self> {
        let n = domain.dim();
        let mut base: Vec<Vec<C64>> = (0..budget.boundary_points)
            .map(|i| num::cube_to_sphere(&num::sobol(i, 2 * n - 1, budget.seed), n))
            .collect();
        base.extend(seeds.iter().filter(|s| num::norm(s) > 0.0).cloned());
        let mut probes = Vec::new();
        for b in base {
            let z0 = domain.boundary_projection(&b)?;
            for k in 1..=budget.levels {
                let eps = 0.5f64.powi(k as i32);
                probes.push(Self::probe(domain, &z0, eps)?);
            }
        }
        Ok(Self { probes })
    }

    fn probe(domain: &Domain, z0: &[C64], eps: f64) -> Result<Probe> {
        let polydisc = Polydisc::new(domain, z0, eps)?;
        let cap = geometry::cap_area_of(&polydisc.frame);
        let radius = polydisc.frame.radii.iter().map(|t| t * t).sum::<f64>().sqrt();
        Ok(Probe { polydisc, cap, radius })
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }

    pub fn evaluate(&self, mu: &DiscreteMeasure) -> CarlesonReport {
        let mut best = (0.0, Vec::new(), 0.0);
        for p in &self.probes {
            let c = &p.polydisc.frame.center;
            let mut mass = 0.0;
            for (x, w) in mu.points.iter().zip(&mu.weights) {
                if *w == 0.0 || num::norm(&num::sub(x, c)) >= p.radius {
                    continue;
                }
                if p.polydisc.contains(x) {
                    mass += w;
                }
            }
            let ratio = mass / p.cap;
            if ratio > best.0 {
                best = (ratio, c.clone(), p.polydisc.frame.epsilon);
            }
        }
        CarlesonReport {
            norm: best.0,
            argsup_point: best.1,
            argsup_epsilon: best.2,
            probes: self.probes.len(),
            atoms: mu.points.len(),
            surrogate_area: true,
            frame_max: false,
        }
    }
}

fn atom_seeds(mu: &DiscreteMeasure, count: usize) -> Vec<Vec<C64>> {
    let mut idx: Vec<usize> = (0..mu.points.len()).filter(|&i| mu.weights[i] > 0.0).collect();
    idx.sort_by(|&a, &b| mu.weights[b].total_cmp(&mu.weights[a]));
    idx.truncate(count);
    idx.into_iter().map(|i| mu.points[i].clone()).collect()
}

/// `sup mu(P_eps(z0) cap D) / cap_area(z0, eps)` over the probe ladder.
pub fn carleson_norm_measure(
    mu: &DiscreteMeasure,
    domain: &Domain,
    budget: &CarlesonBudget,
) -> Result<CarlesonReport> {
    let probes = ProbeSet::new(domain, budget, &atom_seeds(mu, budget.atom_probes))?;
    Ok(probes.evaluate(mu))
}

/// Gauge-polar cells of `D`: `z = p R(theta) theta` with Gauss panels in `p`
/// graded toward the boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellBudget {
    pub directions: usize,
    pub levels: usize,
    pub per_level: usize,
    pub seed: u32,
}

impl Default for CellBudget {
    fn default() -> Self {
        Self {
            directions: 512,
            levels: 8,
            per_level: 3,
            seed: 23,
        }
    }
}

impl CellBudget {
    pub fn doubled(&self) -> Self {
        Self {
            directions: 2 * self.directions,
            ..self.clone()
        }
    }
}

/// Interior cells with volume weights.
pub fn interior_cells(domain: &Domain, budget: &CellBudget) -> Result<Vec<(Vec<C64>, f64)>> {
    let n = domain.dim();
    let area = num::sphere_area(n) / budget.directions as f64;
    let mut breaks = vec![0.0];
    for k in (1..=budget.levels).rev() {
        breaks.push(1.0 - 0.5f64.powi(k as i32));
    }
    breaks.push(1.0);
    let radial = num::composite_gauss(&breaks, budget.per_level);
    let zero = vec![C64::new(0.0, 0.0); n];
    let mut out = Vec::with_capacity(budget.directions * radial.len());
    for i in 0..budget.directions {
        let th = num::cube_to_sphere(&num::sobol(i, 2 * n - 1, budget.seed), n);
        let big_r = domain.ray_exit(&zero, &th)?;
        for &(p, w) in &radial {
            let rho = p * big_r;
            let vol = w * big_r * rho.powi(2 * n as i32 - 1) * area;
            out.push((num::scale_re(&th, rho), vol));
        }
    }
    Ok(out)
}

/// Carleson norm of a current: max over frame index tuples of the Carleson
/// norm of the densities `|theta[e_j, ...]| weight / prod k(z, e_j)`.
pub fn carleson_norm_current(
    theta: &dyn FormField,
    domain: &Domain,
    metric: &MetricModel,
    weighted: bool,
    budget: &CarlesonBudget,
    cells: &CellBudget,
) -> Result<CarlesonReport> {
    let n = domain.dim();
    let (p, q) = theta.bidegree();
    let order = p + q;
    if order > 2 {
        return Err(Error::Unsupported(format!("bidegree ({p},{q})")));
    }
    let tuples: Vec<Vec<usize>> = match order {
        0 => vec![vec![]],
        1 => (0..n).map(|j| vec![j]).collect(),
        _ => (0..n).flat_map(|j| (0..n).map(move |k| vec![j, k])).collect(),
    };
    let grid = interior_cells(domain, cells)?;
    let mut clouds: Vec<DiscreteMeasure> = vec![DiscreteMeasure::default(); tuples.len()];
    for (z, vol) in &grid {
        let d = domain.d(DefiningForm::Analytic, z)?;
        if d < crate::metric::MIN_DISTANCE {
            continue;
        }
        let coeffs = theta.coefficients(z)?;
        if coeffs.norm() == 0.0 {
            continue;
        }
        let frame = metric.frame(z)?;
        let ks: Vec<f64> = frame
            .columns
            .iter()
            .map(|e| geometry::knorm(domain, z, e))
            .collect::<Result<_>>()?;
        let wt = if weighted { d } else { 1.0 };
        for (t, cloud) in tuples.iter().zip(clouds.iter_mut()) {
            let args: Vec<&[C64]> = t.iter().map(|&j| frame.columns[j].as_slice()).collect();
            let denom: f64 = t.iter().map(|&j| ks[j]).product();
            let dens = coeffs.pair(&args).norm() * wt / denom;
            if dens > 0.0 {
                cloud.points.push(z.clone());
                cloud.weights.push(dens * vol);
            }
        }
    }
    let mut seeds = Vec::new();
    for c in &clouds {
        seeds.extend(atom_seeds(c, budget.atom_probes / tuples.len().max(1)));
    }
    let probes = ProbeSet::new(domain, budget, &seeds)?;
    let mut best: Option<CarlesonReport> = None;
    let mut atoms = 0;
    for c in &clouds {
        atoms += c.points.len();
        let r = probes.evaluate(c);
        if best.as_ref().is_none_or(|b| r.norm > b.norm) {
            best = Some(r);
        }
    }
    let mut rep = best.expect("at least one tuple");
    rep.atoms = atoms;
    rep.frame_max = true;
    Ok(rep)
}

/// Frame domination: `|theta[u, v]| / (k(u) k(v))` against
/// `sum_{j,k} |theta[e_j, e_k]| / (k(e_j) k(e_k))` at `z`, maximized over
/// random `u, v`.
pub fn frame_domination(
    theta: &dyn FormField,
    domain: &Domain,
    metric: &MetricModel,
    z: &[C64],
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let n = domain.dim();
    let c = theta.coefficients(z)?;
    let frame = metric.frame(z)?;
    let ks: Vec<f64> = frame
        .columns
        .iter()
        .map(|e| geometry::knorm(domain, z, e))
        .collect::<Result<_>>()?;
    let mut total = 0.0;
    for j in 0..n {
        for k in 0..n {
            total += c.pair(&[&frame.columns[j], &frame.columns[k]]).norm() / (ks[j] * ks[k]);
        }
    }
    let mut rng = num::rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let u = num::random_unit(&mut rng, n);
        let v = num::random_unit(&mut rng, n);
        let lhs = c.pair(&[&u, &v]).norm() / (geometry::knorm(domain, z, &u)? * geometry::knorm(domain, z, &v)?);
        if total > 0.0 {
            worst = worst.max(lhs / total);
        } else if lhs > 0.0 {
            return Ok(f64::INFINITY);
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlaschkeReport {
    pub value: f64,
    /// Value at the coarser of two quadrature levels.
    pub coarse: f64,
    /// Exact slice parametrization (affine `f`) or smoothed trace measure.
    pub exact_slice: bool,
}

/// `int_{X cap D} d(z) d mu_X` with `d = -r` for the analytic defining function.
pub fn blaschke_integral(divisor: &DivisorModel, domain: &Domain) -> Result<BlaschkeReport> {
    if let Some((a, b)) = divisor.polynomial.affine_parts() {
        let fine = blaschke_affine(domain, &a, b, 24)? * divisor.weight;
        let coarse = blaschke_affine(domain, &a, b, 12)? * divisor.weight;
        return Ok(BlaschkeReport { value: fine, coarse, exact_slice: true });
    }
    let trace = |budget: &CellBudget| -> Result<f64> {
        let mut acc = 0.0;
        for (z, vol) in interior_cells(domain, budget)? {
            let d = -domain.r_analytic(&z)?;
            let t = divisor.theta(&z);
            let tr: f64 = (0..divisor.dim()).map(|j| t[(j, j)].re).sum();
            acc += d * tr / std::f64::consts::PI * vol;
        }
        Ok(acc)
    };
    let base = CellBudget { directions: 4096, levels: 10, per_level: 6, seed: 29 };
    let coarse = trace(&base)?;
    let value = trace(&base.doubled())?;
    Ok(BlaschkeReport { value, coarse, exact_slice: false })
}

fn blaschke_affine(domain: &Domain, a: &[C64], b: C64, m: usize) -> Result<f64> {
    let n = domain.dim();
    let an = num::norm(a);
    if an == 0.0 {
        return Ok(0.0);
    }
    // the hyperplane sum a_j z_j = -b is z0 + span(V) with V orthonormal
    let abar = num::scale_re(&num::conj_vec(a), 1.0 / an);
    let z0 = num::scale(&abar, -b / an);
    let basis = num::complement_basis(n, &[abar]);
    let k = basis.len();
    let lift = |w: &[C64]| -> Vec<C64> {
        let mut z = z0.clone();
        for (wi, v) in w.iter().zip(&basis) {
            z = num::axpy(&z, *wi, v);
        }
        z
    };
    if k == 0 {
        return Ok(if domain.r_analytic(&z0)? < 0.0 { -domain.r_analytic(&z0)? } else { 0.0 });
    }
    // find an interior point of the slice by gradient descent on r
    let mut w = vec![C64::new(0.0, 0.0); k];
    let mut rv = domain.r_analytic(&lift(&w))?;
    let mut step = 0.5;
    for _ in 0..200 {
        if rv < -1e-3 {
            break;
        }
        let g = domain.complex_gradient(DefiningForm::Analytic, &lift(&w))?;
        let gw: Vec<C64> = basis.iter().map(|v| num::bdot(&g, v).conj()).collect();
        let gn = num::norm(&gw);
        if gn < 1e-14 {
            break;
        }
        let trial: Vec<C64> = w.iter().zip(&gw).map(|(x, gi)| x - gi * (step / gn)).collect();
        let rt = domain.r_analytic(&lift(&trial))?;
        if rt < rv {
            w = trial;
            rv = rt;
        } else {
            step *= 0.5;
            if step < 1e-12 {
                break;
            }
        }
    }
    if rv >= 0.0 {
        return Ok(0.0);
    }
    let center = lift(&w);
    let slice = Slice { basis: &basis };
    let rule = num::sphere_rule(k, m, 2 * m);
    let radial = num::gauss_legendre(m, 0.0, 1.0);
    let mut acc = 0.0;
    for (th, wt) in &rule {
        let dir = slice.lift_dir(th);
        let big_r = domain.ray_exit(&center, &dir)?;
        for &(x, wx) in &radial {
            let rho = x * big_r;
            let z = num::axpy(&center, C64::new(rho, 0.0), &dir);
            let d = -domain.r_analytic(&z)?;
            acc += wt * wx * big_r * rho.powi(2 * k as i32 - 1) * d;
        }
    }
    Ok(acc)
}

struct Slice<'a> {
    basis: &'a [Vec<C64>],
}

impl Slice<'_> {
    fn lift_dir(&self, th: &[C64]) -> Vec<C64> {
        let n = self.basis[0].len();
        let mut out = vec![C64::new(0.0, 0.0); n];
        for (t, v) in th.iter().zip(self.basis) {
            out = num::axpy(&out, *t, v);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::c;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_parsing_and_derivatives() {
        let p = Polynomial::parse("z1*z2 - 0.5 + (1+2i)*z2^3", 2).unwrap();
        let z = [c(0.3, 0.1), c(-0.2, 0.4)];
        let want = z[0] * z[1] - 0.5 + c(1.0, 2.0) * z[1].powu(3);
        assert!((p.eval(&z) - want).norm() < 1e-14);
        let g = p.gradient(&z);
        assert!((g[0] - z[1]).norm() < 1e-14);
        assert!((g[1] - (z[0] + c(3.0, 6.0) * z[1] * z[1])).norm() < 1e-14);
        assert!(Polynomial::parse("z3", 2).is_err());
        assert!(Polynomial::parse("z1 +", 2).is_err());
        assert_eq!(Polynomial::parse("z1-2", 2).unwrap().affine_parts().unwrap().1, c(-2.0, 0.0));
    }

    #[test]
    fn lelong_examples() {
        let d = DivisorModel::parse("z1", 2, 1.0, 0.1).unwrap();
        let z = [c(0.3, 0.2), c(0.1, -0.5)];
        let t = d.theta(&z);
        let want = 0.01 / (0.13f64 + 0.01).powi(2);
        assert!((t[(0, 0)].re - want).abs() < 1e-12);
        assert!(t[(0, 1)].norm() + t[(1, 0)].norm() + t[(1, 1)].norm() < 1e-15);
        let k = DivisorModel::parse("3", 2, 1.0, 0.1).unwrap();
        assert_eq!(num::frobenius(&k.theta(&z)), 0.0);
        assert!(DivisorModel::parse("0", 2, 1.0, 0.1).is_err());
        let prod = DivisorModel::parse("z1*z2", 2, 1.0, 0.1).unwrap();
        let t = prod.theta(&z);
        let det = t[(0, 0)] * t[(1, 1)] - t[(0, 1)] * t[(1, 0)];
        assert!(det.norm() < 1e-14 && (t[(0, 0)] + t[(1, 1)]).re > 0.0);
    }

    #[test]
    fn lelong_is_ddbar_of_the_potential() {
        // Theta_jk = d_j dbar_k Psi checked through the real Laplacian along e_1
        let d = DivisorModel::parse("z1 + 0.5*z2^2", 2, 1.0, 0.2).unwrap();
        let z = [c(0.2, 0.1), c(0.3, -0.2)];
        let h = 1e-4;
        let f = |w: Vec<C64>| d.potential(&w);
        for j in 0..2 {
            let e = num::unit(2, j);
            let ie = num::scale(&e, num::I);
            let lap = f(num::axpy(&z, c(h, 0.0), &e)) + f(num::axpy(&z, c(-h, 0.0), &e))
                + f(num::axpy(&z, c(h, 0.0), &ie)) + f(num::axpy(&z, c(-h, 0.0), &ie))
                - 4.0 * f(z.to_vec());
            let want = 4.0 * d.theta(&z)[(j, j)].re;
            assert!((lap / (h * h) - want).abs() < 1e-5 * want.abs().max(1.0));
        }
    }

    #[test]
    fn localized_field_is_closed() {
        let dom = Domain::unit_ball(2);
        let d = DivisorModel::parse("z1", 2, 1.0, 0.1).unwrap();
        let f = LocalizedLelong::new(&d, &dom, 0.2);
        let mut rng = num::rng(5);
        for _ in 0..20 {
            let dir = num::random_unit(&mut rng, 2);
            let z = num::scale_re(&dir, 0.85);
            let b = num::real_basis(2);
            let (v, s) = exterior_derivative_2form(&f, &z, &b[0], &b[1], &b[3], 1e-5).unwrap();
            assert!(v <= 1e-5 * s.max(1e-8), "{v} {s}");
        }
    }

    #[test]
    fn blaschke_examples() {
        let b = Domain::unit_ball(2);
        let d = DivisorModel::parse("z1", 2, 1.0, 0.05).unwrap();
        let r = blaschke_integral(&d, &b).unwrap();
        assert!((r.value - PI / 2.0).abs() < 1e-12, "{}", r.value);
        let miss = DivisorModel::parse("z1 - 2", 2, 1.0, 0.05).unwrap();
        assert_eq!(blaschke_integral(&miss, &b).unwrap().value, 0.0);
        let twice = DivisorModel::parse("z1", 2, 2.0, 0.05).unwrap();
        assert!((blaschke_integral(&twice, &b).unwrap().value - PI).abs() < 1e-12);
    }

    #[test]
    fn carleson_measure_examples() {
        let b = Domain::unit_ball(2);
        let budget = CarlesonBudget { boundary_points: 20, levels: 8, atom_probes: 4, seed: 1 };
        let zero = DiscreteMeasure::default();
        assert_eq!(carleson_norm_measure(&zero, &b, &budget).unwrap().norm, 0.0);
        let mu = DiscreteMeasure::atom(vec![c(0.95, 0.0), c(0.0, 0.1)], 0.3);
        let r1 = carleson_norm_measure(&mu, &b, &budget).unwrap();
        let r2 = carleson_norm_measure(&mu.scaled(2.0), &b, &budget).unwrap();
        assert!(r1.norm > 0.0);
        assert!((r2.norm - 2.0 * r1.norm).abs() < 1e-12 * r2.norm);
    }
}
