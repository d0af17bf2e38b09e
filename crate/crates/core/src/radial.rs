//! Radial finite-element DVR.
//!
//! `[0, r_max]` is split into equal elements, each carrying Gauss-Lobatto
//! nodes. Adjacent elements share their boundary node ("bridge"). The node
//! at `r = 0` is dropped so the reduced function `χ = rψ` vanishes there;
//! the node at `r_max` is kept with the natural boundary condition.
//!
//! Radial amplitudes are `u_j = sqrt(W_j) χ(r_j)`, so the radial inner
//! product is a plain dot product and the kinetic matrix is symmetric.

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::quadrature::{gauss_lobatto, lagrange_derivative_matrix};

#[derive(Debug, Clone)]
pub struct RadialGrid {
    r_max: f64,
    order: usize,
    n_elements: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `-1/2 d²/dr²` in the normalized DVR basis (unit mass).
    kinetic: BandMatrix,
}

impl RadialGrid {
    /// `n_points` must be a multiple of `order` (points per element minus one).
    pub fn new(r_max: f64, n_points: usize, order: usize) -> Result<Self> {
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(Error::Grid(format!("r_max must be positive, got {r_max}")));
        }
        if order < 2 {
            return Err(Error::Grid(format!("radial order must be >= 2, got {order}")));
        }
        if n_points == 0 || !n_points.is_multiple_of(order) {
            return Err(Error::Grid(format!(
                "radial point count {n_points} must be a positive multiple of the element order {order}"
            )));
        }
        let n_elements = n_points / order;
        let width = r_max / n_elements as f64;
        let (xi, wq) = gauss_lobatto(order + 1);
        let d = lagrange_derivative_matrix(&xi);

        // Global Lagrange index g = e*order + k, including the r = 0 node at
        // g = 0, which is discarded at the end.
        let total = n_elements * order + 1;
        let mut nodes = vec![0.0; total];
        let mut weights = vec![0.0; total];
        let mut stiff = BandMatrix::zeros(total, order);
        for e in 0..n_elements {
            let left = e as f64 * width;
            for k in 0..=order {
                let g = e * order + k;
                nodes[g] = left + 0.5 * width * (xi[k] + 1.0);
                weights[g] += 0.5 * width * wq[k];
            }
            for k in 0..=order {
                for kp in 0..=order {
                    let s: f64 = (0..=order).map(|q| wq[q] * d[q][k] * d[q][kp]).sum();
                    stiff.add(e * order + k, e * order + kp, s / width);
                }
            }
        }
        // Element boundaries are exact multiples of the width.
        for e in 0..=n_elements {
            nodes[e * order] = e as f64 * width;
        }

        let n = total - 1;
        let mut kinetic = BandMatrix::zeros(n, order);
        for i in 0..n {
            for j in kinetic.columns(i) {
                let v = stiff.get(i + 1, j + 1) / (weights[i + 1] * weights[j + 1]).sqrt();
                kinetic.set(i, j, v);
            }
        }
        // Exact symmetry.
        for i in 0..n {
            for j in kinetic.columns(i) {
                if j > i {
                    let v = 0.5 * (kinetic.get(i, j) + kinetic.get(j, i));
                    kinetic.set(i, j, v);
                    kinetic.set(j, i, v);
                }
            }
        }
        nodes.remove(0);
        weights.remove(0);
        Ok(Self {
            r_max,
            order,
            n_elements,
            nodes,
            weights,
            kinetic,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn element_width(&self) -> f64 {
        self.r_max / self.n_elements as f64
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kinetic(&self) -> &BandMatrix {
        &self.kinetic
    }

    /// Quadrature `∫_0^{r_max} f(r) dr`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&r, &w)| w * f(r)).sum()
    }
}
