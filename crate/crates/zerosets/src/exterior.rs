//! Dense exterior algebra on `dz_1..dz_n, dzbar_1..dzbar_n` (bit `i` is
//! `dz_{i+1}`, bit `n+i` is `dzbar_{i+1}`), enough for the kernel assembly.

use crate::num::{C64, CMat};
use nalgebra::DMatrix;

/// Largest supported complex dimension.
pub const MAX_DIM: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct Form {
    n: usize,
    coeffs: Vec<C64>,
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// Sign of moving the generators of `b` past those of `a`.
fn merge_sign(a: usize, b: usize) -> f64 {
    let mut swaps = 0u32;
    let mut bb = b;
    while bb != 0 {
        let j = bb.trailing_zeros();
        swaps += (a >> (j + 1)).count_ones();
        bb &= bb - 1;
    }
    if swaps % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl Form {
    pub fn zero(n: usize) -> Self {
        assert!(n >= 1 && n <= MAX_DIM, "exterior algebra supports 1 <= n <= {MAX_DIM}");
        Self { n, coeffs: vec![zero(); 1 << (2 * n)] }
    }

    pub fn scalar(n: usize, c: C64) -> Self {
        let mut f = Self::zero(n);
        f.coeffs[0] = c;
        f
    }

    /// `sum a_i dz_i`
    pub fn holomorphic(a: &[C64]) -> Self {
        let mut f = Self::zero(a.len());
        for (i, &x) in a.iter().enumerate() {
            f.coeffs[1 << i] = x;
        }
        f
    }

    /// `sum b_i dzbar_i`
    pub fn antiholomorphic(b: &[C64]) -> Self {
        let n = b.len();
        let mut f = Self::zero(n);
        for (i, &x) in b.iter().enumerate() {
            f.coeffs[1 << (n + i)] = x;
        }
        f
    }

    /// `dbar` of the (1,0) form `sum a_i dz_i` with `m[(i, j)] = dbar_j a_i`:
    /// `sum m_ij dzbar_j ^ dz_i`.
    pub fn dbar_of_holomorphic(m: &CMat) -> Self {
        let n = m.nrows();
        let mut f = Self::zero(n);
        for i in 0..n {
            for j in 0..n {
                // dzbar_j ^ dz_i = - dz_i ^ dzbar_j
                f.coeffs[(1 << i) | (1 << (n + j))] -= m[(i, j)];
            }
        }
        f
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn coefficient(&self, mask: usize) -> C64 {
        self.coeffs[mask]
    }

    /// Coefficient of `dz_1 ^ .. ^ dz_n ^ dzbar_1 ^ .. ^ dzbar_n`.
    pub fn top(&self) -> C64 {
        self.coeffs[(1 << (2 * self.n)) - 1]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == zero())
    }

    pub fn wedge(&self, other: &Form) -> Form {
        let mut out = Form::zero(self.n);
        for (a, &x) in self.coeffs.iter().enumerate() {
            if x == zero() {
                continue;
            }
            for (b, &y) in other.coeffs.iter().enumerate() {
                if y == zero() || a & b != 0 {
                    continue;
                }
                out.coeffs[a | b] += x * y * merge_sign(a, b);
            }
        }
        out
    }

    pub fn power(&self, k: usize) -> Form {
        let mut out = Form::scalar(self.n, C64::new(1.0, 0.0));
        for _ in 0..k {
            out = out.wedge(self);
        }
        out
    }

    pub fn scale(&self, c: C64) -> Form {
        Form { n: self.n, coeffs: self.coeffs.iter().map(|x| x * c).collect() }
    }

    pub fn add(&self, other: &Form) -> Form {
        Form {
            n: self.n,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Evaluation on complexified tangent vectors, each given by its `2n`
    /// values under `dz_1..dz_n, dzbar_1..dzbar_n`. Only the homogeneous part
    /// of matching degree contributes.
    pub fn eval(&self, vectors: &[Vec<C64>]) -> C64 {
        let k = vectors.len();
        let mut acc = zero();
        for (mask, &c) in self.coeffs.iter().enumerate() {
            if c == zero() || mask.count_ones() as usize != k {
                continue;
            }
            let rows: Vec<usize> = (0..2 * self.n).filter(|b| mask >> b & 1 == 1).collect();
            let m = DMatrix::from_fn(k, k, |a, b| vectors[b][rows[a]]);
            acc += c * m.determinant();
        }
        acc
    }
}

/// `dz_1..dz_n dzbar_1..dzbar_n = (-1)^{n(n-1)/2} (-2i)^n dlambda`.
pub fn top_to_lebesgue(n: usize) -> C64 {
    let sign = if (n * (n - 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
    C64::new(0.0, -2.0).powu(n as u32) * sign
}

/// A (1,0) tangent vector as a complexified vector.
pub fn holomorphic_vector(v: &[C64]) -> Vec<C64> {
    let mut out = v.to_vec();
    out.extend(std::iter::repeat(zero()).take(v.len()));
    out
}

/// The (0,1) vector `conj(v)`.
pub fn antiholomorphic_vector(v: &[C64]) -> Vec<C64> {
    let mut out = vec![zero(); v.len()];
    out.extend(v.iter().map(|x| x.conj()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::c;

    #[test]
    fn wedge_is_graded_commutative() {
        let a = Form::holomorphic(&[c(1.0, 2.0), c(0.5, -1.0)]);
        let b = Form::antiholomorphic(&[c(0.3, 0.0), c(-2.0, 1.0)]);
        let ab = a.wedge(&b);
        let ba = b.wedge(&a);
        assert_eq!(ab.add(&ba).max_abs(), 0.0);
        assert_eq!(a.wedge(&a).max_abs(), 0.0);
        let m = CMat::from_fn(2, 2, |i, j| c(i as f64 + 1.0, j as f64));
        let t = Form::dbar_of_holomorphic(&m);
        let diff = t.wedge(&a).add(&a.wedge(&t).scale(c(-1.0, 0.0)));
        assert!(diff.max_abs() < 1e-15);
    }

    #[test]
    fn top_factor_in_one_and_two_dimensions() {
        assert_eq!(top_to_lebesgue(1), c(0.0, -2.0));
        assert_eq!(top_to_lebesgue(2), c(4.0, 0.0));
    }

    #[test]
    fn evaluation_is_a_determinant() {
        let f = Form::holomorphic(&[c(1.0, 0.0), c(0.0, 0.0)])
            .wedge(&Form::holomorphic(&[c(0.0, 0.0), c(1.0, 0.0)]));
        let v = holomorphic_vector(&[c(1.0, 1.0), c(2.0, 0.0)]);
        let w = holomorphic_vector(&[c(0.0, 1.0), c(3.0, 0.0)]);
        let got = f.eval(&[v.clone(), w.clone()]);
        let want = c(1.0, 1.0) * c(3.0, 0.0) - c(2.0, 0.0) * c(0.0, 1.0);
        assert!((got - want).norm() < 1e-14);
        assert!((f.eval(&[w, v]) + want).norm() < 1e-14);
    }
}
