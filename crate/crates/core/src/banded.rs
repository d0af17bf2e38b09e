//! Small banded-matrix kernels for the radial operators.

use num_complex::Complex64 as C64;

/// Symmetric real band matrix stored as full rows of width `2p+1`.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, p: usize) -> Self {
        Self {
            n,
            p,
            data: vec![0.0; n * (2 * p + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.p
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.p);
        i * (2 * self.p + 1) + (j + self.p - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) > self.p || i >= self.n || j >= self.n {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    pub fn columns(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.p)..(i + self.p + 1).min(self.n)
    }

    /// `y = A x` for a strided complex vector.
    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        for i in 0..self.n {
            let mut acc = C64::new(0.0, 0.0);
            for j in self.columns(i) {
                acc += self.data[self.slot(i, j)] * x[j];
            }
            y[i] = acc;
        }
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in self.columns(i) {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// LU factors (no pivoting) of `I + i tau (A + diag(d))` for real symmetric
/// band `A`. The real part is the identity, so elimination without
/// pivoting is stable.
#[derive(Debug, Clone)]
pub struct CayleySolver {
    n: usize,
    p: usize,
    // Row i stores entries j in [i-p, i+p]; lower part holds L (unit diag
    // implied), upper part holds U.
    lu: Vec<C64>,
    // Explicit operator `I - i tau H` for the right-hand side.
    rhs: Vec<C64>,
}

impl CayleySolver {
    pub fn new(a: &BandMatrix, diag: &[f64], tau: f64) -> Self {
        let n = a.n;
        let p = a.p;
        let w = 2 * p + 1;
        let mut lu = vec![C64::new(0.0, 0.0); n * w];
        let mut rhs = vec![C64::new(0.0, 0.0); n * w];
        for i in 0..n {
            for j in a.columns(i) {
                let mut h = a.get(i, j);
                if i == j {
                    h += diag[i];
                }
                let id = if i == j { 1.0 } else { 0.0 };
                lu[i * w + j + p - i] = C64::new(id, tau * h);
                rhs[i * w + j + p - i] = C64::new(id, -tau * h);
            }
        }
        let idx = |i: usize, j: usize| i * w + j + p - i;
        for k in 0..n {
            let pivot = lu[idx(k, k)];
            for i in (k + 1)..(k + p + 1).min(n) {
                let f = lu[idx(i, k)] / pivot;
                lu[idx(i, k)] = f;
                for j in (k + 1)..(k + p + 1).min(n) {
                    let u = lu[idx(k, j)];
                    lu[idx(i, j)] -= f * u;
                }
            }
        }
        Self { n, p, lu, rhs }
    }

    /// Applies the Cayley transform `(I + i tau H)^{-1} (I - i tau H)` in place.
    pub fn apply(&self, x: &mut [C64], scratch: &mut [C64]) {
        let (n, p, w) = (self.n, self.p, 2 * self.p + 1);
        for i in 0..n {
            let lo = i.saturating_sub(p);
            let hi = (i + p + 1).min(n);
            let mut acc = C64::new(0.0, 0.0);
            for j in lo..hi {
                acc += self.rhs[i * w + j + p - i] * x[j];
            }
            scratch[i] = acc;
        }
        // forward substitution, unit lower
        for i in 0..n {
            let lo = i.saturating_sub(p);
            let mut acc = scratch[i];
            for j in lo..i {
                acc -= self.lu[i * w + j + p - i] * scratch[j];
            }
            scratch[i] = acc;
        }
        for i in (0..n).rev() {
            let hi = (i + p + 1).min(n);
            let mut acc = scratch[i];
            for j in (i + 1)..hi {
                acc -= self.lu[i * w + j + p - i] * x[j];
            }
            x[i] = acc / self.lu[i * w + p];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_band() -> BandMatrix {
        let mut a = BandMatrix::zeros(12, 2);
        for i in 0..12 {
            a.set(i, i, 2.0 + i as f64 * 0.1);
            if i + 1 < 12 {
                a.set(i, i + 1, -1.0);
                a.set(i + 1, i, -1.0);
            }
            if i + 2 < 12 {
                a.set(i, i + 2, 0.3);
                a.set(i + 2, i, 0.3);
            }
        }
        a
    }

    #[test]
    fn cayley_is_unitary_and_solves() {
        let a = sample_band();
        let d: Vec<f64> = (0..12).map(|i| -1.0 / (i as f64 + 1.0)).collect();
        let tau = 0.37;
        let s = CayleySolver::new(&a, &d, tau);
        let x0: Vec<C64> = (0..12).map(|i| C64::new((i as f64).sin(), (i as f64 * 0.7).cos())).collect();
        let mut x = x0.clone();
        let mut scratch = vec![C64::new(0.0, 0.0); 12];
        s.apply(&mut x, &mut scratch);
        let n0: f64 = x0.iter().map(|z| z.norm_sqr()).sum();
        let n1: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        assert!((n0 - n1).abs() < 1e-13);
        // check (I + i tau H) x = (I - i tau H) x0
        let mut hx = vec![C64::new(0.0, 0.0); 12];
        let mut hx0 = vec![C64::new(0.0, 0.0); 12];
        a.matvec(&x, &mut hx);
        a.matvec(&x0, &mut hx0);
        for i in 0..12 {
            let lhs = x[i] + C64::new(0.0, tau) * (hx[i] + d[i] * x[i]);
            let rhs = x0[i] - C64::new(0.0, tau) * (hx0[i] + d[i] * x0[i]);
            assert!((lhs - rhs).norm() < 1e-13);
        }
    }
}
