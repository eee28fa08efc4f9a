//! Hermitian positive-definite matrix functions and the contour-integral
//! solver for `MH + HM = C`.

use crate::error::{Error, Result};
use crate::num::{self, C64, CMat};
use rand::Rng;
use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Default number of trapezoid nodes per circle.
pub const DEFAULT_NODES: usize = 128;
const MAX_NODES: usize = 1 << 16;

/// A Hermitian positive-definite matrix together with its eigendecomposition.
///
/// Eigenvalues are sorted in decreasing order; each eigenvector is rephased so
/// that its largest entry is real and positive.
#[derive(Clone, Debug)]
pub struct HermitianPd {
    mat: CMat,
    values: Vec<f64>,
    vectors: CMat,
}

impl HermitianPd {
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::InvalidInput("matrix must be square and non-empty".into()));
        }
        let scale = max_abs(&m).max(1.0);
        let asym = max_abs(&(&m - m.adjoint()));
        if asym > 1e-12 * scale {
            return Err(Error::InvalidInput(format!(
                "matrix is not Hermitian (asymmetry {asym:e})"
            )));
        }
        let m = hermitian_part(&m);
        let eig = SymmetricEigen::new(m.clone());
        let n = m.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let lmin = values[n - 1];
        if !(lmin > 0.0) || !lmin.is_finite() {
            return Err(Error::NotPositiveDefinite(lmin));
        }
        let mut vectors = CMat::zeros(n, n);
        for (col, &k) in order.iter().enumerate() {
            let v = eig.eigenvectors.column(k);
            let big = v
                .iter()
                .copied()
                .max_by(|a, b| a.norm().total_cmp(&b.norm()))
                .unwrap_or(C64::new(1.0, 0.0));
            let phase = if big.norm() > 0.0 { big.conj() / big.norm() } else { C64::new(1.0, 0.0) };
            for i in 0..n {
                vectors[(i, col)] = v[i] * phase;
            }
        }
        Ok(Self { mat: m, values, vectors })
    }

    /// Builds `U diag(values) U*` directly from an orthonormal eigenbasis.
    pub fn from_eigen(values: Vec<f64>, vectors: CMat) -> Result<Self> {
        let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            values.len(),
            values.iter().map(|&x| C64::new(x, 0.0)),
        ));
        Self::new(&vectors * d * vectors.adjoint())
    }

    pub fn identity(n: usize) -> Self {
        Self {
            mat: CMat::identity(n, n),
            values: vec![1.0; n],
            vectors: CMat::identity(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    /// Eigenvalues, largest first.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    /// Unitary matrix whose columns are the eigenvectors.
    pub fn eigenvectors(&self) -> &CMat {
        &self.vectors
    }

    pub fn condition_number(&self) -> f64 {
        self.values[0] / self.values[self.dim() - 1]
    }

    /// `f(M) = U diag(f(lambda)) U*`.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> CMat {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let s = f(self.values[j]);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        scaled * self.vectors.adjoint()
    }

    /// Same eigenbasis, eigenvalues passed through `f` (must stay positive).
    pub fn map_pd<F: Fn(f64) -> f64>(&self, f: F) -> Result<Self> {
        let values: Vec<f64> = self.values.iter().map(|&x| f(x)).collect();
        if values.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::NotPositiveDefinite(values.iter().copied().fold(f64::INFINITY, f64::min)));
        }
        let mut idx: Vec<usize> = (0..values.len()).collect();
        idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        let n = self.dim();
        let mut vectors = CMat::zeros(n, n);
        for (col, &k) in idx.iter().enumerate() {
            vectors.set_column(col, &self.vectors.column(k));
        }
        let sorted: Vec<f64> = idx.iter().map(|&k| values[k]).collect();
        let mat = self.map(&f);
        Ok(Self { mat: hermitian_part(&mat), values: sorted, vectors })
    }

    /// `U* X U`
    pub fn to_eigenbasis(&self, x: &CMat) -> CMat {
        self.vectors.adjoint() * x * &self.vectors
    }

    /// `U X U*`
    pub fn from_eigenbasis(&self, x: &CMat) -> CMat {
        &self.vectors * x * self.vectors.adjoint()
    }
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// `Phi(M) = M^{-2}`.
pub fn phi(m: &HermitianPd) -> CMat {
    m.map(|x| 1.0 / (x * x))
}

/// `A` with `A^{-2} = B`.
pub fn inv_sqrt(b: &HermitianPd) -> HermitianPd {
    b.map_pd(|x| 1.0 / x.sqrt()).expect("positive eigenvalues stay positive")
}

/// `M^{-2}(MH + HM)M^{-2}` evaluated literally.
///
/// The Frechet derivative of `M -> M^{-2}` in direction `H` is the negative
/// of this expression.
pub fn dphi(m: &HermitianPd, h: &CMat) -> CMat {
    let mm2 = phi(m);
    let a = m.matrix();
    hermitian_part(&(&mm2 * (a * h + h * a) * &mm2))
}

/// Solves `MH + HM = C` by dividing by `lambda_i + lambda_j` in the eigenbasis.
pub fn sylvester_direct(m: &HermitianPd, c: &CMat) -> CMat {
    let ct = m.to_eigenbasis(c);
    let n = m.dim();
    let l = m.eigenvalues();
    let ht = CMat::from_fn(n, n, |i, j| ct[(i, j)] / (l[i] + l[j]));
    hermitian_part(&m.from_eigenbasis(&ht))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: f64,
    pub radius: f64,
}

/// A disjoint union of counterclockwise circles centred on the positive axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub circles: Vec<Circle>,
    /// Initial trapezoid nodes per circle; doubled until the rule settles.
    pub nodes: usize,
}

impl ContourSpec {
    /// Discs of radius `c * mu_j` around each eigenvalue, merged when they meet.
    pub fn relative(m: &HermitianPd, c: f64) -> Result<Self> {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::InvalidContour(format!("relative scale {c} must lie in (0, 1)")));
        }
        let discs: Vec<(f64, f64)> = m.eigenvalues().iter().map(|&mu| (mu, c * mu)).collect();
        Ok(Self::merged(discs))
    }

    /// Discs of common radius `c * d`, clipped to half the smallest eigenvalue.
    pub fn absolute(m: &HermitianPd, c: f64, d: f64) -> Result<Self> {
        if !(c > 0.0 && d > 0.0) {
            return Err(Error::InvalidContour("contour radius must be positive".into()));
        }
        let mu_min = m.eigenvalues()[m.dim() - 1];
        let rho = (c * d).min(0.5 * mu_min);
        let discs: Vec<(f64, f64)> = m.eigenvalues().iter().map(|&mu| (mu, rho)).collect();
        Ok(Self::merged(discs))
    }

    fn merged(mut discs: Vec<(f64, f64)>) -> Self {
        // intervals on the real axis: [center - radius, center + radius]
        discs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut ivs: Vec<(f64, f64)> = Vec::new();
        for (mu, r) in discs {
            let (lo, hi) = (mu - r, mu + r);
            match ivs.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => ivs.push((lo, hi)),
            }
        }
        let circles = ivs
            .into_iter()
            .map(|(lo, hi)| Circle {
                center: 0.5 * (lo + hi),
                radius: 0.5 * (hi - lo),
            })
            .collect();
        Self {
            circles,
            nodes: DEFAULT_NODES,
        }
    }

    /// Checks that the circles are disjoint, enclose every eigenvalue of `M`
    /// and exclude every eigenvalue of `-M`.
    pub fn validate(&self, m: &HermitianPd) -> Result<()> {
        for (a, ca) in self.circles.iter().enumerate() {
            if !(ca.radius > 0.0) {
                return Err(Error::InvalidContour("non-positive radius".into()));
            }
            for cb in &self.circles[a + 1..] {
                if (ca.center - cb.center).abs() <= ca.radius + cb.radius {
                    return Err(Error::InvalidContour("circles intersect".into()));
                }
            }
        }
        for &mu in m.eigenvalues() {
            let inside = self
                .circles
                .iter()
                .filter(|c| (mu - c.center).abs() < c.radius)
                .count();
            if inside != 1 {
                return Err(Error::InvalidContour(format!(
                    "eigenvalue {mu:e} is enclosed {inside} times"
                )));
            }
            if self.circles.iter().any(|c| (-mu - c.center).abs() <= c.radius) {
                return Err(Error::InvalidContour(format!(
                    "mirror eigenvalue {:e} is enclosed",
                    -mu
                )));
            }
        }
        Ok(())
    }

    /// Eigenbasis weights `(1/2 pi i) \oint d xi / ((xi - mu_i)(xi + mu_j))`
    /// with `nodes` trapezoid points per circle.
    fn weights(&self, mu: &[f64], nodes: usize) -> Vec<C64> {
        let n = mu.len();
        let mut w = vec![C64::new(0.0, 0.0); n * n];
        for circ in &self.circles {
            for k in 0..nodes {
                let th = 2.0 * PI * (k as f64 + 0.5) / nodes as f64;
                let e = C64::from_polar(1.0, th);
                let xi = circ.center + circ.radius * e;
                // (1/2 pi i) * i r e^{i th} * (2 pi / N)
                let jac = circ.radius * e / nodes as f64;
                let left: Vec<C64> = mu.iter().map(|&m| 1.0 / (xi - m)).collect();
                let right: Vec<C64> = mu.iter().map(|&m| 1.0 / (xi + m)).collect();
                for i in 0..n {
                    let li = left[i] * jac;
                    for j in 0..n {
                        w[i * n + j] += li * right[j];
                    }
                }
            }
        }
        w
    }
}

/// Result of a contour solve with its quadrature diagnostics.
#[derive(Clone, Debug)]
pub struct ContourSolution {
    pub h: CMat,
    pub nodes: usize,
    pub estimated_error: f64,
}

/// `H = (1/2 pi i) \oint (xi - M)^{-1} C (xi + M)^{-1} d xi`, which solves
/// `MH + HM = C` for a counterclockwise contour around `sp(M)`.
pub fn sylvester_contour(m: &HermitianPd, c: &CMat, contour: &ContourSpec) -> Result<CMat> {
    Ok(sylvester_contour_diag(m, c, contour)?.h)
}

pub fn sylvester_contour_diag(
    m: &HermitianPd,
    c: &CMat,
    contour: &ContourSpec,
) -> Result<ContourSolution> {
    contour.validate(m)?;
    let mu = m.eigenvalues();
    let n = mu.len();
    let mut nodes = contour.nodes.max(8);
    let mut w = contour.weights(mu, nodes);
    let (w, nodes, err) = loop {
        let w2 = contour.weights(mu, 2 * nodes);
        let scale = w2.iter().map(|x| x.norm()).fold(0.0, f64::max);
        let diff = w
            .iter()
            .zip(&w2)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        nodes *= 2;
        if diff <= 1e-13 * scale {
            break (w2, nodes, diff / scale);
        }
        if nodes >= MAX_NODES {
            if diff <= 1e-8 * scale {
                break (w2, nodes, diff / scale);
            }
            return Err(Error::Quadrature(format!(
                "contour rule still moving by {:e} at {} nodes",
                diff / scale,
                nodes
            )));
        }
        w = w2;
    };
    let ct = m.to_eigenbasis(c);
    let ht = CMat::from_fn(n, n, |i, j| ct[(i, j)] * w[i * n + j]);
    Ok(ContourSolution {
        h: hermitian_part(&m.from_eigenbasis(&ht)),
        nodes,
        estimated_error: err,
    })
}

/// Inverse of [`dphi`] at `M = B^{-1/2}`: the `H` with `dphi(M, H) = H'`,
/// computed over the relative contour of scale `c` around `sp(M)`.
pub fn dphi_inverse(b: &HermitianPd, hp: &CMat, c: f64) -> Result<CMat> {
    let m = inv_sqrt(b);
    let contour = ContourSpec::relative(&m, c)?;
    dphi_inverse_with(&m, hp, &contour)
}

/// As [`dphi_inverse`] with `M` and its contour given.
pub fn dphi_inverse_with(m: &HermitianPd, hp: &CMat, contour: &ContourSpec) -> Result<CMat> {
    let m2 = m.map(|x| x * x);
    let rhs = &m2 * hp * &m2;
    sylvester_contour(m, &rhs, contour)
}

/// JSON layout: rows of `[re, im]` pairs.
pub type JsonMatrix = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(m: &CMat) -> JsonMatrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn matrix_from_json(rows: &JsonMatrix) -> Result<CMat> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(Error::InvalidInput("ragged or empty matrix".into()));
    }
    let k = rows[0].len();
    Ok(CMat::from_fn(n, k, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

/// Random Hermitian PD matrix with a Haar-like eigenbasis and condition
/// number at most `cond`.
pub fn random_hpd<R: Rng>(rng: &mut R, n: usize, cond: f64) -> HermitianPd {
    let g = CMat::from_fn(n, n, |_, _| C64::new(num::normal(rng), num::normal(rng)));
    let q = g.qr().q();
    let vals: Vec<f64> = (0..n)
        .map(|k| if n == 1 { 1.0 } else { cond.powf(-(k as f64) / (n - 1) as f64 * rng.random::<f64>()) })
        .collect();
    HermitianPd::from_eigen(vals, q).expect("positive eigenvalues")
}

/// Hermitian part of a complex Gaussian matrix.
pub fn random_herm<R: Rng>(rng: &mut R, n: usize) -> CMat {
    let g = CMat::from_fn(n, n, |_, _| C64::new(num::normal(rng), num::normal(rng)));
    hermitian_part(&g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::c;

    fn diag(v: &[f64]) -> HermitianPd {
        HermitianPd::new(CMat::from_fn(v.len(), v.len(), |i, j| {
            if i == j { c(v[i], 0.0) } else { c(0.0, 0.0) }
        }))
        .unwrap()
    }

    fn real_mat(rows: &[&[f64]]) -> CMat {
        CMat::from_fn(rows.len(), rows[0].len(), |i, j| c(rows[i][j], 0.0))
    }

    #[test]
    fn inv_sqrt_examples() {
        let a = inv_sqrt(&diag(&[4.0, 9.0]));
        assert!(max_abs(&(a.matrix() - real_mat(&[&[0.5, 0.0], &[0.0, 1.0 / 3.0]]))) < 1e-15);
        let i = inv_sqrt(&HermitianPd::identity(3));
        assert!(max_abs(&(i.matrix() - CMat::identity(3, 3))) < 1e-15);
    }

    #[test]
    fn dphi_closed_form() {
        let m = diag(&[1.0, 2.0]);
        let h = real_mat(&[&[1.0, 1.0], &[1.0, 2.0]]);
        let want = real_mat(&[&[2.0, 0.75], &[0.75, 0.5]]);
        assert!(max_abs(&(dphi(&m, &h) - want)) < 1e-14);
        let id = HermitianPd::identity(2);
        assert!(max_abs(&(dphi(&id, &h) - &h * c(2.0, 0.0))) < 1e-14);
    }

    #[test]
    fn dphi_is_minus_the_frechet_derivative() {
        let mut rng = num::rng(3);
        let m = random_hpd(&mut rng, 3, 10.0);
        let h = random_herm(&mut rng, 3);
        let d = dphi(&m, &h);
        let mut prev = f64::INFINITY;
        for t in [1e-3, 1e-4, 1e-5] {
            let mt = HermitianPd::new(m.matrix() + &h * c(t, 0.0)).unwrap();
            let fd = (phi(&mt) - phi(&m)) / c(t, 0.0);
            let err = max_abs(&(fd + &d));
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 1e-3 * max_abs(&d));
    }

    #[test]
    fn sylvester_examples() {
        let m = diag(&[1.0, 2.0]);
        let cm = real_mat(&[&[2.0, 3.0], &[3.0, 8.0]]);
        let want = real_mat(&[&[1.0, 1.0], &[1.0, 2.0]]);
        assert!(max_abs(&(sylvester_direct(&m, &cm) - &want)) < 1e-14);
        let contour = ContourSpec::relative(&m, 0.25).unwrap();
        assert!(max_abs(&(sylvester_contour(&m, &cm, &contour).unwrap() - &want)) < 1e-9);
        let id = HermitianPd::identity(2);
        let ci = ContourSpec::relative(&id, 0.25).unwrap();
        let half = &cm * c(0.5, 0.0);
        assert!(max_abs(&(sylvester_contour(&id, &cm, &ci).unwrap() - half)) < 1e-10);
    }

    #[test]
    fn contour_missing_an_eigenvalue_is_rejected() {
        let m = diag(&[1.0, 2.0]);
        let bad = ContourSpec {
            circles: vec![Circle { center: 2.0, radius: 0.5 }],
            nodes: 64,
        };
        assert!(matches!(
            sylvester_contour(&m, &CMat::identity(2, 2), &bad),
            Err(Error::InvalidContour(_))
        ));
        let mirror = ContourSpec {
            circles: vec![Circle { center: 0.5, radius: 2.0 }],
            nodes: 64,
        };
        assert!(mirror.validate(&m).is_err());
    }

    #[test]
    fn dphi_inverse_examples() {
        let id = HermitianPd::identity(2);
        let hp = real_mat(&[&[1.0, -2.0], &[-2.0, 3.0]]);
        let got = dphi_inverse(&id, &hp, 0.25).unwrap();
        assert!(max_abs(&(got - &hp * c(0.5, 0.0))) < 1e-10);

        // B = diag(16, 81): M = diag(1/4, 1/9), diagonal H' maps to mu^3 H'_jj / 2
        let b = diag(&[16.0, 81.0]);
        let hd = real_mat(&[&[1.0, 0.0], &[0.0, 2.0]]);
        let got = dphi_inverse(&b, &hd, 0.25).unwrap();
        let want = real_mat(&[&[0.25f64.powi(3) / 2.0, 0.0], &[0.0, 2.0 * (1.0 / 9.0f64).powi(3) / 2.0]]);
        assert!(max_abs(&(got - want)) < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let m = CMat::from_fn(2, 3, |i, j| c(i as f64, j as f64 - 0.5));
        let back = matrix_from_json(&matrix_to_json(&m)).unwrap();
        assert_eq!(m, back);
    }
}
