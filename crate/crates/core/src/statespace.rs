//! Single-input single-output continuous-time state-space models.
//!
//! Matrices are stored densely in row-major order. The models produced in this
//! crate are small (at most a dozen states), so dense storage keeps the
//! integrator simple and allocation-free once a [`Rk4Workspace`] exists.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `x' = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel<T> {
    n: usize,
    a: Vec<T>,
    b: Vec<T>,
    c: Vec<T>,
    d: T,
}

impl<T: Scalar> StateSpaceModel<T> {
    /// Builds a model from a row-major `n x n` state matrix and the input,
    /// output and feedthrough terms.
    pub fn new(a: Vec<T>, b: Vec<T>, c: Vec<T>, d: T) -> Result<Self> {
        let n = b.len();
        if a.len() != n * n || c.len() != n {
            return Err(Error::InvalidConfig(format!(
                "inconsistent dimensions: A has {} entries, B has {}, C has {}",
                a.len(),
                b.len(),
                c.len()
            )));
        }
        Ok(Self { n, a, b, c, d })
    }

    /// A stateless model `y = k u`.
    pub fn gain(k: T) -> Self {
        Self {
            n: 0,
            a: Vec::new(),
            b: Vec::new(),
            c: Vec::new(),
            d: k,
        }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn a(&self) -> &[T] {
        &self.a
    }

    pub fn b(&self) -> &[T] {
        &self.b
    }

    pub fn c(&self) -> &[T] {
        &self.c
    }

    pub fn d(&self) -> T {
        self.d
    }

    #[inline]
    pub fn a_at(&self, row: usize, col: usize) -> T {
        self.a[row * self.n + col]
    }

    /// Output scaled by `k`: `k * G(s)`.
    pub fn scaled(&self, k: T) -> Self {
        Self {
            n: self.n,
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c.iter().map(|&ci| ci * k).collect(),
            d: self.d * k,
        }
    }

    /// Parallel connection: the sum of the branch outputs for a shared input.
    /// The state matrix of the result is block diagonal.
    pub fn parallel(branches: &[StateSpaceModel<T>]) -> Self {
        let n: usize = branches.iter().map(|m| m.n).sum();
        let mut a = vec![T::zero(); n * n];
        let mut b = Vec::with_capacity(n);
        let mut c = Vec::with_capacity(n);
        let mut d = T::zero();
        let mut offset = 0;
        for m in branches {
            for i in 0..m.n {
                for j in 0..m.n {
                    a[(offset + i) * n + offset + j] = m.a[i * m.n + j];
                }
            }
            b.extend_from_slice(&m.b);
            c.extend_from_slice(&m.c);
            d = d + m.d;
            offset += m.n;
        }
        Self { n, a, b, c, d }
    }

    /// Applies the change of coordinates `x = T z` for a diagonal `T`.
    pub fn diagonal_similarity(&self, scale: &[T]) -> Self {
        assert_eq!(scale.len(), self.n, "one scale factor per state");
        let n = self.n;
        let mut a = self.a.clone();
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = self.a[i * n + j] * scale[j] / scale[i];
            }
        }
        Self {
            n,
            a,
            b: self.b.iter().zip(scale).map(|(&bi, &s)| bi / s).collect(),
            c: self.c.iter().zip(scale).map(|(&ci, &s)| ci * s).collect(),
            d: self.d,
        }
    }

    /// `C (jωI - A)^{-1} B + D`, evaluated by Gaussian elimination with
    /// partial pivoting on the complex resolvent.
    pub fn freq_response(&self, omega: T) -> Result<Complex<T>> {
        let n = self.n;
        if n == 0 {
            return Ok(Complex::new(self.d, T::zero()));
        }
        let mut m: Vec<Complex<T>> = self.a.iter().map(|&x| Complex::new(-x, T::zero())).collect();
        for i in 0..n {
            m[i * n + i] = m[i * n + i] + Complex::new(T::zero(), omega);
        }
        let mut rhs: Vec<Complex<T>> = self.b.iter().map(|&x| Complex::new(x, T::zero())).collect();

        let scale = m.iter().map(|z| z.norm()).fold(T::zero(), T::max);
        let tiny = scale * T::epsilon() * T::lit(n as f64);
        for col in 0..n {
            let (pivot, pivot_norm) = (col..n)
                .map(|r| (r, m[r * n + col].norm()))
                .fold((col, T::neg_infinity()), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            if pivot_norm <= tiny {
                return Err(Error::SingularResponse { omega: omega.as_f64() });
            }
            if pivot != col {
                for j in 0..n {
                    m.swap(col * n + j, pivot * n + j);
                }
                rhs.swap(col, pivot);
            }
            let p = m[col * n + col];
            for r in col + 1..n {
                let factor = m[r * n + col] / p;
                if factor.norm() == T::zero() {
                    continue;
                }
                for j in col..n {
                    let sub = factor * m[col * n + j];
                    m[r * n + j] = m[r * n + j] - sub;
                }
                rhs[r] = rhs[r] - factor * rhs[col];
            }
        }
        for i in (0..n).rev() {
            let mut acc = rhs[i];
            for j in i + 1..n {
                acc = acc - m[i * n + j] * rhs[j];
            }
            rhs[i] = acc / m[i * n + i];
        }
        let y = self
            .c
            .iter()
            .zip(&rhs)
            .fold(Complex::new(self.d, T::zero()), |acc, (&ci, &zi)| acc + zi * ci);
        Ok(y)
    }

    /// Eigenvalues of `A` when it is lower triangular (the cascaded and
    /// block-diagonal realizations built by this crate always are).
    pub fn triangular_eigenvalues(&self) -> Option<Vec<T>> {
        let n = self.n;
        for i in 0..n {
            for j in i + 1..n {
                if self.a[i * n + j] != T::zero() {
                    return None;
                }
            }
        }
        Some((0..n).map(|i| self.a[i * n + i]).collect())
    }

    /// `A x + B u` written into `out`.
    #[inline]
    pub fn derivative(&self, x: &[T], u: T, out: &mut [T]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.a[i * n..(i + 1) * n];
            let mut acc = self.b[i] * u;
            for (aij, xj) in row.iter().zip(x) {
                acc = acc + *aij * *xj;
            }
            out[i] = acc;
        }
    }

    #[inline]
    pub fn output(&self, x: &[T], u: T) -> T {
        self.c.iter().zip(x).fold(self.d * u, |acc, (&ci, &xi)| acc + ci * xi)
    }

    /// One classical fourth-order Runge-Kutta step of length `h` with the
    /// input held at `u`.
    pub fn rk4_step(&self, x: &mut [T], u: T, h: T, ws: &mut Rk4Workspace<T>) {
        let n = self.n;
        if n == 0 {
            return;
        }
        ws.ensure(n);
        let half = h / T::lit(2.0);
        let sixth = h / T::lit(6.0);
        let two = T::lit(2.0);

        self.derivative(x, u, &mut ws.k1);
        for i in 0..n {
            ws.tmp[i] = x[i] + half * ws.k1[i];
        }
        self.derivative(&ws.tmp, u, &mut ws.k2);
        for i in 0..n {
            ws.tmp[i] = x[i] + half * ws.k2[i];
        }
        self.derivative(&ws.tmp, u, &mut ws.k3);
        for i in 0..n {
            ws.tmp[i] = x[i] + h * ws.k3[i];
        }
        self.derivative(&ws.tmp, u, &mut ws.k4);
        for i in 0..n {
            x[i] = x[i] + sixth * (ws.k1[i] + two * ws.k2[i] + two * ws.k3[i] + ws.k4[i]);
        }
    }
}

/// Scratch buffers for [`StateSpaceModel::rk4_step`].
#[derive(Debug, Clone, Default)]
pub struct Rk4Workspace<T> {
    k1: Vec<T>,
    k2: Vec<T>,
    k3: Vec<T>,
    k4: Vec<T>,
    tmp: Vec<T>,
}

impl<T: Scalar> Rk4Workspace<T> {
    pub fn new(n: usize) -> Self {
        let mut ws = Self {
            k1: Vec::new(),
            k2: Vec::new(),
            k3: Vec::new(),
            k4: Vec::new(),
            tmp: Vec::new(),
        };
        ws.ensure(n);
        ws
    }

    fn ensure(&mut self, n: usize) {
        if self.k1.len() < n {
            for v in [&mut self.k1, &mut self.k2, &mut self.k3, &mut self.k4, &mut self.tmp] {
                v.resize(n, T::zero());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pure_gain_response_is_flat() {
        let m = StateSpaceModel::gain(3.5_f64);
        for w in [1e-3, 1.0, 1e4] {
            let g = m.freq_response(w).unwrap();
            assert_eq!(g, Complex::new(3.5, 0.0));
        }
    }

    #[test]
    fn first_order_lag_response() {
        // 1/(s+2)
        let m = StateSpaceModel::new(vec![-2.0_f64], vec![1.0], vec![1.0], 0.0).unwrap();
        let g = m.freq_response(2.0).unwrap();
        let expect = Complex::new(1.0, 0.0) / Complex::new(2.0, 2.0);
        assert_relative_eq!(g.re, expect.re, epsilon = 1e-15);
        assert_relative_eq!(g.im, expect.im, epsilon = 1e-15);
    }

    #[test]
    fn singular_resolvent_is_reported() {
        // pure oscillator with eigenvalues +-j
        let m = StateSpaceModel::new(vec![0.0_f64, 1.0, -1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], 0.0).unwrap();
        assert!(matches!(m.freq_response(1.0), Err(Error::SingularResponse { .. })));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        assert!(StateSpaceModel::new(vec![1.0_f64; 3], vec![1.0, 1.0], vec![1.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn rk4_matches_exponential_decay() {
        let m = StateSpaceModel::new(vec![-1.0_f64], vec![0.0], vec![1.0], 0.0).unwrap();
        let mut ws = Rk4Workspace::new(1);
        let mut x = [1.0];
        for _ in 0..100 {
            m.rk4_step(&mut x, 0.0, 0.01, &mut ws);
        }
        assert_relative_eq!(x[0], (-1.0_f64).exp(), max_relative = 1e-9);
    }

    #[test]
    fn parallel_sums_branches() {
        let a = StateSpaceModel::new(vec![-1.0_f64], vec![1.0], vec![1.0], 0.5).unwrap();
        let b = StateSpaceModel::new(vec![-3.0_f64], vec![2.0], vec![1.0], 0.0).unwrap();
        let p = StateSpaceModel::parallel(&[a.clone(), b.clone()]);
        assert_eq!(p.order(), 2);
        for w in [0.1, 1.0, 10.0] {
            let sum = a.freq_response(w).unwrap() + b.freq_response(w).unwrap();
            let got = p.freq_response(w).unwrap();
            assert_relative_eq!(got.re, sum.re, epsilon = 1e-14);
            assert_relative_eq!(got.im, sum.im, epsilon = 1e-14);
        }
        assert_eq!(p.triangular_eigenvalues().unwrap(), vec![-1.0, -3.0]);
    }
}
