//! Gauss quadrature rules and the special functions the grids are built from.

use std::f64::consts::PI;

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    // P'_n from the standard identity; valid away from x = ±1.
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

pub fn legendre(n: usize, x: f64) -> f64 {
    legendre_with_derivative(n, x).0
}

/// Gauss-Legendre nodes (ascending) and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Gauss-Lobatto-Legendre nodes (ascending, including ±1) and weights.
pub fn gauss_lobatto(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let order = n - 1;
    let mut nodes = vec![0.0; n];
    nodes[0] = -1.0;
    nodes[order] = 1.0;
    // Interior nodes are the roots of P'_order. Newton on
    // q(x) = P'_order(x), using (1-x²)P'' = 2xP' - order(order+1)P.
    for i in 1..order {
        let mut x = -(PI * i as f64 / order as f64).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(order, x);
            let ddp = (2.0 * x * dp - (order * (order + 1)) as f64 * p) / (1.0 - x * x);
            let dx = dp / ddp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
    }
    if n % 2 == 1 {
        nodes[order / 2] = 0.0;
    }
    // Symmetrize to remove rounding asymmetry.
    for i in 0..n / 2 {
        let s = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        nodes[i] = -s;
        nodes[n - 1 - i] = s;
    }
    let scale = 2.0 / (order * (order + 1)) as f64;
    let weights = nodes
        .iter()
        .map(|&x| {
            let p = legendre(order, x);
            scale / (p * p)
        })
        .collect();
    (nodes, weights)
}

/// Derivative matrix `D[i][j] = L_j'(x_i)` of the Lagrange interpolants
/// through `nodes`, built from barycentric weights.
pub fn lagrange_derivative_matrix(nodes: &[f64]) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let bary: Vec<f64> = (0..n)
        .map(|j| {
            let prod: f64 = (0..n)
                .filter(|&k| k != j)
                .map(|k| nodes[j] - nodes[k])
                .product();
            1.0 / prod
        })
        .collect();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                d[i][j] = bary[j] / bary[i] / (nodes[i] - nodes[j]);
                diag -= d[i][j];
            }
        }
        d[i][i] = diag;
    }
    d
}

/// Fully normalized associated Legendre functions `Θ_l^m(x)`, `l = m..=l_max`,
/// with `∫_{-1}^{1} Θ_l^m(x)² dx = 1` and no Condon-Shortley phase.
pub fn normalized_associated_legendre(l_max: usize, m: usize, x: f64) -> Vec<f64> {
    if l_max < m {
        return Vec::new();
    }
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = std::f64::consts::FRAC_1_SQRT_2;
    for k in 1..=m {
        let kf = k as f64;
        pmm *= ((2.0 * kf + 1.0) / (2.0 * kf)).sqrt() * s;
    }
    let mut out = Vec::with_capacity(l_max - m + 1);
    out.push(pmm);
    if l_max == m {
        return out;
    }
    let mf = m as f64;
    out.push(x * (2.0 * mf + 3.0).sqrt() * pmm);
    for l in (m + 2)..=l_max {
        let lf = l as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
        let next = a * (x * out[l - m - 1] - b * out[l - m - 2]);
        out.push(next);
    }
    out
}

/// Generalized Laguerre polynomial `L_k^{(a)}(x)`.
pub fn laguerre(k: usize, a: f64, x: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let (mut l0, mut l1) = (1.0, 1.0 + a - x);
    for j in 1..k {
        let jf = j as f64;
        let l2 = ((2.0 * jf + 1.0 + a - x) * l1 - (jf + a) * l0) / (jf + 1.0);
        l0 = l1;
        l1 = l2;
    }
    l1
}
