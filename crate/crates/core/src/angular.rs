//! Two-dimensional angular DVR.
//!
//! Nodes are Gauss-Legendre in `cos θ` and uniform in `φ`. The spectral
//! side uses real spherical harmonics `Y_lm` (`m > 0` ↦ `cos mφ`,
//! `m < 0` ↦ `sin |m|φ`) with `l <= N_θ - 1` and `|m| <= (N_φ - 1)/2`;
//! the product quadrature integrates all their pairwise products exactly.
//! Each `m` block is completed to `N_θ` functions by Gram-Schmidt on the
//! next associated Legendre functions, so the transform is a square
//! orthogonal matrix and grid ↔ spectral is an isometry.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, normalized_associated_legendre};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Channel {
    pub l: usize,
    pub m: i64,
    /// `false` for the Gram-Schmidt completion functions, whose `l` is only
    /// nominal.
    pub exact: bool,
}

#[derive(Debug, Clone)]
pub struct AngularGrid {
    n_theta: usize,
    n_phi: usize,
    cos_theta: Vec<f64>,
    theta_weights: Vec<f64>,
    phi: Vec<f64>,
    /// Unit vector `(sinθ cosφ, sinθ sinφ, cosθ)` per point.
    directions: Vec<[f64; 3]>,
    /// Quadrature weight per point (sums to 4π).
    weights: Vec<f64>,
    channels: Vec<Channel>,
    /// `basis[(point, channel)]`, weighted so that the matrix is orthogonal.
    basis: Array2<f64>,
    l_squared: Array2<C64>,
    ly: Array2<C64>,
}

fn phi_function(m: i64, phi: f64) -> f64 {
    if m == 0 {
        1.0 / (2.0 * PI).sqrt()
    } else if m > 0 {
        (m as f64 * phi).cos() / PI.sqrt()
    } else {
        ((-m) as f64 * phi).sin() / PI.sqrt()
    }
}

/// Real spherical harmonic evaluated at `(cos θ, φ)`.
pub fn real_harmonic(l: usize, m: i64, cos_theta: f64, phi: f64) -> f64 {
    let am = m.unsigned_abs() as usize;
    if am > l {
        return 0.0;
    }
    let theta = normalized_associated_legendre(l, am, cos_theta)[l - am];
    theta * phi_function(m, phi)
}

/// `L_y` within one `l` shell, in the real basis ordered `m = -l..=l`.
/// Purely imaginary and Hermitian.
fn ly_real_block(l: usize) -> Vec<Vec<C64>> {
    let li = l as i64;
    let dim = 2 * l + 1;
    let idx = |mu: i64| (mu + li) as usize;
    let lf = l as f64;
    // complex basis |l mu>, Condon-Shortley phase
    let mut lc = vec![vec![C64::new(0.0, 0.0); dim]; dim];
    for mu in -li..=li {
        let muf = mu as f64;
        if mu < li {
            let cp = (lf * (lf + 1.0) - muf * (muf + 1.0)).sqrt();
            lc[idx(mu + 1)][idx(mu)] += C64::new(0.0, -0.5 * cp);
        }
        if mu > -li {
            let cm = (lf * (lf + 1.0) - muf * (muf - 1.0)).sqrt();
            lc[idx(mu - 1)][idx(mu)] += C64::new(0.0, 0.5 * cm);
        }
    }
    // rows: real m, columns: complex mu
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut u = vec![vec![C64::new(0.0, 0.0); dim]; dim];
    for m in -li..=li {
        if m == 0 {
            u[idx(0)][idx(0)] = C64::new(1.0, 0.0);
        } else if m > 0 {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            u[idx(m)][idx(m)] = C64::new(sign * s, 0.0);
            u[idx(m)][idx(-m)] = C64::new(s, 0.0);
        } else {
            let am = -m;
            let sign = if am % 2 == 0 { 1.0 } else { -1.0 };
            u[idx(m)][idx(-am)] = C64::new(0.0, s);
            u[idx(m)][idx(am)] = C64::new(0.0, -sign * s);
        }
    }
    // L_real = conj(U) Lc U^T
    let mut out = vec![vec![C64::new(0.0, 0.0); dim]; dim];
    for a in 0..dim {
        for b in 0..dim {
            let mut acc = C64::new(0.0, 0.0);
            for p in 0..dim {
                for q in 0..dim {
                    acc += u[a][p].conj() * lc[p][q] * u[b][q];
                }
            }
            out[a][b] = acc;
        }
    }
    out
}

impl AngularGrid {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        for (name, n) in [("N_theta", n_theta), ("N_phi", n_phi)] {
            if n < 3 || n % 2 == 0 {
                return Err(Error::Grid(format!("{name} must be odd and >= 3, got {n}")));
            }
        }
        let m_max = ((n_phi - 1) / 2) as i64;
        let l_max = n_theta - 1;
        let (cos_theta, theta_weights) = gauss_legendre(n_theta);
        let phi: Vec<f64> = (0..n_phi).map(|b| 2.0 * PI * b as f64 / n_phi as f64).collect();
        let w_phi = 2.0 * PI / n_phi as f64;
        let n_ang = n_theta * n_phi;

        let mut directions = Vec::with_capacity(n_ang);
        let mut weights = Vec::with_capacity(n_ang);
        for (a, &x) in cos_theta.iter().enumerate() {
            let s = (1.0 - x * x).sqrt();
            for &p in &phi {
                directions.push([s * p.cos(), s * p.sin(), x]);
                weights.push(theta_weights[a] * w_phi);
            }
        }

        // θ vectors per |m|: exact block first, then completion.
        let mut theta_vectors: Vec<Vec<Vec<f64>>> = Vec::new();
        for am in 0..=(m_max as usize) {
            let top = am + n_theta - 1;
            let table: Vec<Vec<f64>> = cos_theta
                .iter()
                .map(|&x| normalized_associated_legendre(top, am, x))
                .collect();
            let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(n_theta);
            for j in 0..n_theta {
                let mut v: Vec<f64> = (0..n_theta)
                    .map(|a| theta_weights[a].sqrt() * table[a][j])
                    .collect();
                let l = am + j;
                if l > l_max {
                    for _ in 0..2 {
                        for prev in &vecs {
                            let d: f64 = v.iter().zip(prev).map(|(x, y)| x * y).sum();
                            for (x, y) in v.iter_mut().zip(prev) {
                                *x -= d * y;
                            }
                        }
                    }
                    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if n < 1e-10 {
                        return Err(Error::Grid("angular completion is singular".into()));
                    }
                    v.iter_mut().for_each(|x| *x /= n);
                }
                vecs.push(v);
            }
            theta_vectors.push(vecs);
        }

        let mut exact = Vec::new();
        let mut completion = Vec::new();
        for m in -m_max..=m_max {
            let am = m.unsigned_abs() as usize;
            for j in 0..n_theta {
                let l = am + j;
                let ch = Channel {
                    l,
                    m,
                    exact: l <= l_max,
                };
                if ch.exact {
                    exact.push(ch);
                } else {
                    completion.push(ch);
                }
            }
        }
        exact.sort_by_key(|c| (c.l, c.m));
        completion.sort_by_key(|c| (c.m, c.l));
        let channels: Vec<Channel> = exact.into_iter().chain(completion).collect();

        let mut basis = Array2::<f64>::zeros((n_ang, n_ang));
        for (k, ch) in channels.iter().enumerate() {
            let am = ch.m.unsigned_abs() as usize;
            let tv = &theta_vectors[am][ch.l - am];
            for a in 0..n_theta {
                for (b, &p) in phi.iter().enumerate() {
                    basis[[a * n_phi + b, k]] = tv[a] * w_phi.sqrt() * phi_function(ch.m, p);
                }
            }
        }

        let lookup = |l: usize, m: i64| channels.iter().position(|c| c.exact && c.l == l && c.m == m);
        let n_ch = channels.len();
        let mut l2_spec = vec![0.0; n_ch];
        for (k, ch) in channels.iter().enumerate() {
            l2_spec[k] = (ch.l * (ch.l + 1)) as f64;
        }
        let mut ly_spec = Array2::<C64>::zeros((n_ch, n_ch));
        for l in 0..=l_max {
            let block = ly_real_block(l);
            let li = l as i64;
            for m1 in -li..=li {
                for m2 in -li..=li {
                    let v = block[(m1 + li) as usize][(m2 + li) as usize];
                    if v.norm() == 0.0 {
                        continue;
                    }
                    if let (Some(i), Some(j)) = (lookup(l, m1), lookup(l, m2)) {
                        ly_spec[[i, j]] = C64::new(0.0, v.im);
                    }
                }
            }
        }

        let basis_c = basis.mapv(|v| C64::new(v, 0.0));
        let mut scaled = basis_c.clone();
        for (k, mut col) in scaled.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| v * l2_spec[k]);
        }
        let l_squared = symmetrize(&scaled.dot(&basis_c.t()));
        let ly = hermitize(&basis_c.dot(&ly_spec).dot(&basis_c.t()));

        Ok(Self {
            n_theta,
            n_phi,
            cos_theta,
            theta_weights,
            phi,
            directions,
            weights,
            channels,
            basis,
            l_squared,
            ly,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn l_max(&self) -> usize {
        self.n_theta - 1
    }

    pub fn m_max(&self) -> usize {
        (self.n_phi - 1) / 2
    }

    pub fn cos_theta(&self) -> &[f64] {
        &self.cos_theta
    }

    pub fn theta_weights(&self) -> &[f64] {
        &self.theta_weights
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn directions(&self) -> &[[f64; 3]] {
        &self.directions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `(cos θ, φ)` of a grid point.
    pub fn point(&self, index: usize) -> (f64, f64) {
        (self.cos_theta[index / self.n_phi], self.phi[index % self.n_phi])
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channel_index(&self, l: usize, m: i64) -> Option<usize> {
        self.channels.iter().position(|c| c.exact && c.l == l && c.m == m)
    }

    pub fn basis(&self) -> &Array2<f64> {
        &self.basis
    }

    /// Dense `L²` acting on weighted grid amplitudes.
    pub fn l_squared(&self) -> &Array2<C64> {
        &self.l_squared
    }

    /// Dense `L_y` acting on weighted grid amplitudes.
    pub fn ly(&self) -> &Array2<C64> {
        &self.ly
    }
}

fn symmetrize(a: &Array2<C64>) -> Array2<C64> {
    let at = a.t();
    let mut out = a.clone();
    for ((i, j), v) in out.indexed_iter_mut() {
        *v = C64::new(0.5 * (a[[i, j]].re + at[[i, j]].re), 0.0);
    }
    out
}

fn hermitize(a: &Array2<C64>) -> Array2<C64> {
    let mut out = a.clone();
    for ((i, j), v) in out.indexed_iter_mut() {
        *v = 0.5 * (a[[i, j]] + a[[j, i]].conj());
    }
    out
}
