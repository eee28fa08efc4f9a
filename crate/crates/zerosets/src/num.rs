//! Small numeric helpers shared by every module: complex vector algebra,
//! quadrature rules, seeded randomness and the smooth step.

use gauss_quad::GaussLegendre;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;
use std::num::NonZeroUsize;

pub type C64 = Complex64;
pub type CVec = DVector<C64>;
pub type CMat = DMatrix<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Hermitian inner product `sum conj(a_i) b_i`.
pub fn hdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Bilinear pairing `sum a_i b_i`.
pub fn bdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Real inner product of the underlying real vectors.
pub fn rdot(a: &[C64], b: &[C64]) -> f64 {
    hdot(a, b).re
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

pub fn add(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[C64], s: C64) -> Vec<C64> {
    a.iter().map(|x| x * s).collect()
}

pub fn scale_re(a: &[C64], s: f64) -> Vec<C64> {
    a.iter().map(|x| x * s).collect()
}

/// `a + s b`
pub fn axpy(a: &[C64], s: C64, b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn conj_vec(a: &[C64]) -> Vec<C64> {
    a.iter().map(|x| x.conj()).collect()
}

pub fn normalized(a: &[C64]) -> Option<Vec<C64>> {
    let n = norm(a);
    if n == 0.0 || !n.is_finite() {
        None
    } else {
        Some(scale_re(a, 1.0 / n))
    }
}

pub fn unit(n: usize, j: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); n];
    v[j] = C64::new(1.0, 0.0);
    v
}

/// Real basis of `C^n = R^{2n}` ordered `e_1, i e_1, e_2, i e_2, ...`.
pub fn real_basis(n: usize) -> Vec<Vec<C64>> {
    (0..2 * n)
        .map(|a| {
            let mut v = vec![C64::new(0.0, 0.0); n];
            v[a / 2] = if a % 2 == 0 { C64::new(1.0, 0.0) } else { I };
            v
        })
        .collect()
}

pub fn mat_vec(m: &CMat, v: &[C64]) -> Vec<C64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

pub fn column(m: &CMat, j: usize) -> Vec<C64> {
    m.column(j).iter().copied().collect()
}

pub fn from_columns(cols: &[Vec<C64>]) -> CMat {
    let n = cols.first().map_or(0, |c| c.len());
    CMat::from_fn(n, cols.len(), |i, j| cols[j][i])
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Gram-Schmidt of `v` against an orthonormal family, then normalized.
pub fn orthogonalize(v: &[C64], basis: &[Vec<C64>]) -> Option<Vec<C64>> {
    let mut w = v.to_vec();
    for _ in 0..2 {
        for b in basis {
            let p = hdot(b, &w);
            for (wi, bi) in w.iter_mut().zip(b) {
                *wi -= p * bi;
            }
        }
    }
    let n = norm(&w);
    if n < 1e-12 * norm(v).max(1e-300) {
        None
    } else {
        Some(scale_re(&w, 1.0 / n))
    }
}

/// Orthonormal basis of the complement of an orthonormal family.
pub fn complement_basis(n: usize, family: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let mut out: Vec<Vec<C64>> = Vec::new();
    for j in 0..n {
        let mut all = family.to_vec();
        all.extend(out.iter().cloned());
        if let Some(w) = orthogonalize(&unit(n, j), &all) {
            out.push(w);
        }
        if out.len() + family.len() == n {
            break;
        }
    }
    out
}

/// Gauss-Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(n.max(1)).expect("nonzero"));
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule.as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (mid + half * x, half * w))
        .collect()
}

/// Composite Gauss-Legendre rule on consecutive breakpoints.
pub fn composite_gauss(breaks: &[f64], per_panel: usize) -> Vec<(f64, f64)> {
    let base = gauss_legendre(per_panel, -1.0, 1.0);
    let mut out = Vec::with_capacity(base.len() * breaks.len());
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        out.extend(base.iter().map(|&(x, wt)| (mid + half * x, half * wt)));
    }
    out
}

/// Equispaced angles for the periodic trapezoid rule.
pub fn trapezoid_angles(n: usize, offset: f64) -> Vec<f64> {
    (0..n)
        .map(|k| 2.0 * PI * (k as f64 + offset) / n as f64)
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_cvec<R: Rng>(rng: &mut R, n: usize) -> Vec<C64> {
    (0..n).map(|_| C64::new(normal(rng), normal(rng))).collect()
}

pub fn random_unit<R: Rng>(rng: &mut R, n: usize) -> Vec<C64> {
    loop {
        if let Some(v) = normalized(&random_cvec(rng, n)) {
            return v;
        }
    }
}

/// Uniform point of the Euclidean ball of radius `radius` in `C^n`.
pub fn random_in_ball<R: Rng>(rng: &mut R, n: usize, radius: f64) -> Vec<C64> {
    let u = random_unit(rng, n);
    let t: f64 = rng.random::<f64>().powf(1.0 / (2 * n) as f64);
    scale_re(&u, radius * t)
}

/// Point `index` of a scrambled Sobol sequence in `[0,1)^dims`.
pub fn sobol(index: usize, dims: usize, seed: u32) -> Vec<f64> {
    (0..dims)
        .map(|d| sobol_burley::sample(index as u32, d as u32, seed) as f64)
        .collect()
}

/// Maps a cube point in `[0,1)^{k}` to a point of the standard simplex
/// `{a_i >= 0, sum a_i = 1}` with `k + 1` coordinates, uniformly.
pub fn cube_to_simplex(u: &[f64]) -> Vec<f64> {
    let mut s: Vec<f64> = u.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let mut out = Vec::with_capacity(u.len() + 1);
    let mut prev = 0.0;
    for x in s {
        out.push(x - prev);
        prev = x;
    }
    out.push(1.0 - prev);
    out
}

/// Maps `2n - 1` cube coordinates to the unit sphere of `C^n`, uniformly.
pub fn cube_to_sphere(u: &[f64], n: usize) -> Vec<C64> {
    let a = cube_to_simplex(&u[..n - 1]);
    (0..n)
        .map(|j| C64::from_polar(a[j].max(0.0).sqrt(), 2.0 * PI * u[n - 1 + j]))
        .collect()
}

/// Maps `2n` cube coordinates to the ball of radius `radius` in `C^n`, uniformly.
pub fn cube_to_ball(u: &[f64], n: usize, radius: f64) -> Vec<C64> {
    let a = cube_to_simplex(&u[..n]);
    (0..n)
        .map(|j| C64::from_polar(radius * a[j].max(0.0).sqrt(), 2.0 * PI * u[n + j]))
        .collect()
}

/// Quasi-uniform points of the unit sphere of `C^n`.
pub fn sphere_points(count: usize, n: usize, seed: u32) -> Vec<Vec<C64>> {
    (0..count)
        .map(|i| cube_to_sphere(&sobol(i, 2 * n - 1, seed), n))
        .collect()
}

/// Euclidean area of the unit sphere `S^{2n-1}`.
pub fn sphere_area(n: usize) -> f64 {
    let fact: f64 = (1..n).map(|k| k as f64).product();
    2.0 * PI.powi(n as i32) / fact
}

/// Smooth step built from `exp(-1/x)`: 0 for `x <= 0`, 1 for `x >= 1`.
/// Returns the value and its first two derivatives.
pub fn smooth_step(x: f64) -> (f64, f64, f64) {
    if x <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if x >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let f = |t: f64| -> (f64, f64, f64) {
        if t <= 0.0 {
            (0.0, 0.0, 0.0)
        } else {
            let e = (-1.0 / t).exp();
            let t2 = t * t;
            (e, e / t2, e * (1.0 / (t2 * t2) - 2.0 / (t2 * t)))
        }
    };
    let (a, a1, a2) = f(x);
    let (b0, b1, b2) = f(1.0 - x);
    let (b, b1, b2) = (b0, -b1, b2);
    let d = a + b;
    let d1 = a1 + b1;
    let d2 = a2 + b2;
    let s = a / d;
    let s1 = (a1 * d - a * d1) / (d * d);
    let s2 = (a2 * d - a * d2) / (d * d) - 2.0 * d1 * (a1 * d - a * d1) / (d * d * d);
    (s, s1, s2)
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Parses `"0.5"`, `"0.5+0.2i"`, `"-i"` and similar into a complex number.
pub fn parse_complex(s: &str) -> Option<C64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        return None;
    }
    if !t.ends_with('i') {
        return t.parse::<f64>().ok().map(real);
    }
    let body = &t[..t.len() - 1];
    let split = body
        .char_indices()
        .skip(1)
        .filter(|&(k, ch)| (ch == '+' || ch == '-') && !matches!(&body[k - 1..k], "e" | "E"))
        .map(|(k, _)| k)
        .last();
    let im_of = |p: &str| -> Option<f64> {
        match p {
            "" | "+" => Some(1.0),
            "-" => Some(-1.0),
            _ => p.parse().ok(),
        }
    };
    match split {
        Some(k) => Some(C64::new(body[..k].parse().ok()?, im_of(&body[k..])?)),
        None => Some(C64::new(0.0, im_of(body)?)),
    }
}

pub fn parse_cvec(s: &str) -> Option<Vec<C64>> {
    s.split(',').map(parse_complex).collect()
}

/// Product rule on the simplex `{u_i >= 0, sum u_i = 1}` with `k` coordinates
/// (`k <= 3`), `m` Gauss points per collapsed direction. Weights sum to the
/// simplex volume `1 / (k-1)!`.
pub fn simplex_rule(k: usize, m: usize) -> Vec<(Vec<f64>, f64)> {
    match k {
        1 => vec![(vec![1.0], 1.0)],
        2 => gauss_legendre(m, 0.0, 1.0)
            .into_iter()
            .map(|(a, w)| (vec![a, 1.0 - a], w))
            .collect(),
        3 => {
            let g = gauss_legendre(m, 0.0, 1.0);
            let mut out = Vec::with_capacity(m * m);
            for &(a, wa) in &g {
                for &(b, wb) in &g {
                    let u1 = a;
                    let u2 = (1.0 - a) * b;
                    out.push((vec![u1, u2, 1.0 - u1 - u2], wa * wb * (1.0 - a)));
                }
            }
            out
        }
        _ => panic!("simplex rule implemented for k <= 3"),
    }
}

/// Quadrature of the unit sphere of `C^n` (`n <= 3`) in the coordinates
/// `z_j = sqrt(u_j) e^{i phi_j}`: Gauss on the simplex times the periodic
/// trapezoid in every angle. Weights sum to the sphere area.
pub fn sphere_rule(n: usize, m_u: usize, m_phi: usize) -> Vec<(Vec<C64>, f64)> {
    let simplex = simplex_rule(n, m_u);
    let angles = trapezoid_angles(m_phi, 0.5);
    let c = 2f64.powi(1 - n as i32) * (2.0 * PI / m_phi as f64).powi(n as i32);
    let total = m_phi.pow(n as u32);
    let mut out = Vec::with_capacity(simplex.len() * total);
    for (u, w) in &simplex {
        for idx in 0..total {
            let mut rem = idx;
            let z: Vec<C64> = (0..n)
                .map(|j| {
                    let a = angles[rem % m_phi];
                    rem /= m_phi;
                    C64::from_polar(u[j].max(0.0).sqrt(), a)
                })
                .collect();
            out.push((z, w * c));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_step_derivatives_match_differences() {
        for &x in &[0.2, 0.5, 0.77] {
            let h = 1e-5;
            let (_, d1, d2) = smooth_step(x);
            let (p, _, _) = smooth_step(x + h);
            let (m, _, _) = smooth_step(x - h);
            let (v, _, _) = smooth_step(x);
            assert!((d1 - (p - m) / (2.0 * h)).abs() < 1e-6);
            assert!((d2 - (p - 2.0 * v + m) / (h * h)).abs() < 1e-3);
        }
        assert_eq!(smooth_step(-0.1).0, 0.0);
        assert_eq!(smooth_step(1.1).0, 1.0);
        assert!((smooth_step(0.5).0 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gauss_rule_integrates_polynomials() {
        let q = gauss_legendre(5, 0.0, 2.0);
        let s: f64 = q.iter().map(|(x, w)| w * x.powi(7)).sum();
        assert!((s - 2f64.powi(8) / 8.0).abs() < 1e-10);
    }

    #[test]
    fn complex_parsing() {
        assert_eq!(parse_complex("0.5"), Some(c(0.5, 0.0)));
        assert_eq!(parse_complex("0.5+0.25i"), Some(c(0.5, 0.25)));
        assert_eq!(parse_complex("-i"), Some(c(0.0, -1.0)));
        assert_eq!(parse_complex("1e-3-2i"), Some(c(1e-3, -2.0)));
        assert_eq!(parse_cvec("1,0"), Some(vec![c(1.0, 0.0), c(0.0, 0.0)]));
    }

    #[test]
    fn sphere_rule_integrates_moments() {
        for n in 1..=3 {
            let rule = sphere_rule(n, 6, 8);
            let area: f64 = rule.iter().map(|(_, w)| w).sum();
            assert!((area - sphere_area(n)).abs() < 1e-12 * area);
            // mean of |z_1|^2 over the sphere is 1/n
            let m: f64 = rule.iter().map(|(z, w)| w * z[0].norm_sqr()).sum::<f64>() / area;
            assert!((m - 1.0 / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_area_values() {
        assert!((sphere_area(2) - 2.0 * PI * PI).abs() < 1e-12);
        assert!((sphere_area(3) - PI.powi(3)).abs() < 1e-12);
    }
}
