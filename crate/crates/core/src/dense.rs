//! Small dense complex matrices: products, LU solves and the exponential.
//!
//! Only used on the projected Krylov matrices, whose order stays below a
//! hundred or so, so everything here is plain row-major loops.

use num_complex::Complex;

use crate::scalar::{creal, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    n: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![creal(T::zero()); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = creal(T::one());
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.data[i * n + k];
                if aik.re == T::zero() && aik.im == T::zero() {
                    continue;
                }
                let brow = &other.data[k * n..(k + 1) * n];
                let orow = &mut out.data[i * n..(i + 1) * n];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += aik * b;
                }
            }
        }
        out
    }

    pub fn add_scaled(&mut self, other: &Self, s: T) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    pub fn norm_inf(&self) -> T {
        (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .fold(T::zero(), |acc, z| acc + z.norm())
            })
            .fold(T::zero(), T::max)
    }

    pub fn column(&self, j: usize) -> Vec<Complex<T>> {
        (0..self.n).map(|i| self[(i, j)]).collect()
    }

    /// Solves `self * X = rhs` by LU with partial pivoting.
    ///
    /// Returns `None` when a zero pivot is met.
    pub fn solve(&self, rhs: &Self) -> Option<Self> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut x = rhs.data.clone();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, a[i * n + k].norm()))
                .fold((k, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax == T::zero() {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                    x.swap(k * n + j, p * n + j);
                }
            }
            let pivot = a[k * n + k];
            for i in (k + 1)..n {
                let l = a[i * n + k] / pivot;
                if l.re == T::zero() && l.im == T::zero() {
                    continue;
                }
                for j in k..n {
                    let akj = a[k * n + j];
                    a[i * n + j] -= l * akj;
                }
                for j in 0..n {
                    let xkj = x[k * n + j];
                    x[i * n + j] -= l * xkj;
                }
            }
        }
        for k in (0..n).rev() {
            let pivot = a[k * n + k];
            for j in 0..n {
                let mut acc = x[k * n + j];
                for i in (k + 1)..n {
                    acc -= a[k * n + i] * x[i * n + j];
                }
                x[k * n + j] = acc / pivot;
            }
        }
        Some(Self { n, data: x })
    }

    /// Matrix exponential by scaling and squaring with the diagonal [13/13]
    /// Padé approximant (Higham 2005), scaled so that `||A / 2^s||_1 <= θ13`.
    pub fn expm(&self) -> Self {
        const B: [f64; 14] = [
            64764752532480000.0,
            32382376266240000.0,
            7771770303897600.0,
            1187353796428800.0,
            129060195264000.0,
            10559470521600.0,
            670442572800.0,
            33522128640.0,
            1323241920.0,
            40840800.0,
            960960.0,
            16380.0,
            182.0,
            1.0,
        ];
        const THETA13: f64 = 5.371920351148152;
        let n = self.n;
        if n == 0 {
            return Self::zeros(0);
        }
        let norm = self.norm_one();
        let mut squarings = 0i32;
        if norm > T::lit(THETA13) {
            squarings = (norm / T::lit(THETA13)).log2().ceil().to_i32().unwrap_or(0);
        }
        let a = self.scale(creal(T::lit(0.5).powi(squarings)));
        let a2 = a.matmul(&a);
        let a4 = a2.matmul(&a2);
        let a6 = a4.matmul(&a2);
        let b = |k: usize| T::lit(B[k]);

        let mut inner = Self::zeros(n);
        inner.add_scaled(&a6, b(13));
        inner.add_scaled(&a4, b(11));
        inner.add_scaled(&a2, b(9));
        let mut u = a6.matmul(&inner);
        u.add_scaled(&a6, b(7));
        u.add_scaled(&a4, b(5));
        u.add_scaled(&a2, b(3));
        u.add_diagonal(b(1));
        let u = a.matmul(&u);

        let mut inner = Self::zeros(n);
        inner.add_scaled(&a6, b(12));
        inner.add_scaled(&a4, b(10));
        inner.add_scaled(&a2, b(8));
        let mut v = a6.matmul(&inner);
        v.add_scaled(&a6, b(6));
        v.add_scaled(&a4, b(4));
        v.add_scaled(&a2, b(2));
        v.add_diagonal(b(0));

        let mut num = v.clone();
        num.add_scaled(&u, T::one());
        let mut den = v;
        den.add_scaled(&u, -T::one());
        let mut r = den
            .solve(&num)
            .expect("Padé denominator is nonsingular after scaling");
        for _ in 0..squarings {
            r = r.matmul(&r);
        }
        r
    }

    fn add_diagonal(&mut self, s: T) {
        for i in 0..self.n {
            self.data[i * self.n + i] += s;
        }
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> T {
        let mut sums = vec![T::zero(); self.n];
        for row in self.data.chunks(self.n.max(1)) {
            for (s, z) in sums.iter_mut().zip(row) {
                *s += z.norm();
            }
        }
        sums.into_iter().fold(T::zero(), T::max)
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = Complex<T>;
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.n + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.n + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cplx;

    #[test]
    fn expm_of_diagonal() {
        let mut m = DenseMatrix::<f64>::zeros(3);
        m[(0, 0)] = cplx(-3.0, 0.5);
        m[(1, 1)] = cplx(0.1, 0.0);
        m[(2, 2)] = cplx(-40.0, -7.0);
        let e = m.expm();
        for i in 0..3 {
            let expected = m[(i, i)].exp();
            assert!((e[(i, i)] - expected).norm() <= 1e-13 * expected.norm().max(1e-300) + 1e-300);
        }
        assert_eq!(e[(0, 1)], cplx(0.0, 0.0));
    }

    #[test]
    fn expm_of_nilpotent_jordan_block() {
        // exp([[0, 1], [0, 0]] * t) = [[1, t], [0, 1]]
        let mut m = DenseMatrix::<f64>::zeros(2);
        m[(0, 1)] = cplx(3.5, -1.0);
        let e = m.expm();
        assert!((e[(0, 0)] - cplx(1.0, 0.0)).norm() < 1e-15);
        assert!((e[(0, 1)] - cplx(3.5, -1.0)).norm() < 1e-14);
        assert!((e[(1, 1)] - cplx(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn rotation_generator() {
        // exp([[0, -θ], [θ, 0]]) is a rotation by θ.
        let theta = 2.3;
        let mut m = DenseMatrix::<f64>::zeros(2);
        m[(0, 1)] = cplx(-theta, 0.0);
        m[(1, 0)] = cplx(theta, 0.0);
        let e = m.expm();
        assert!((e[(0, 0)].re - theta.cos()).abs() < 1e-14);
        assert!((e[(1, 0)].re - theta.sin()).abs() < 1e-14);
    }
}
