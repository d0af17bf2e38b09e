//! Deterministic test states shared by unit and integration tests.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::angular::real_harmonic;
use crate::grid::{DvrGrid, Wavefunction};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Unit-norm state with independent random amplitudes at every node.
pub fn random_state(grid: &Arc<DvrGrid>, seed: u64) -> Wavefunction {
    let mut rng = rng(seed);
    let mut psi = Wavefunction::zeros(grid);
    psi.amplitudes_mut()
        .mapv_inplace(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    psi.normalize();
    psi
}

/// Smooth unit-norm state: random low-`l` harmonics times radial functions
/// decaying well inside `r_scale`.
pub fn random_compact_state(grid: &Arc<DvrGrid>, seed: u64, r_scale: f64) -> Wavefunction {
    let mut rng = rng(seed);
    let l_top = grid.angular().l_max().min(3);
    let m_top = grid.angular().m_max() as i64;
    let mut terms = Vec::new();
    for l in 0..=l_top {
        let li = l as i64;
        for m in -li.min(m_top)..=li.min(m_top) {
            let c = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let a = rng.random_range(0.5..1.5);
            let b = rng.random_range(-1.0..1.0);
            terms.push((l, m, c, a, b));
        }
    }
    let decay = 5.0 / r_scale;
    let mut psi = Wavefunction::from_fn(grid, |r, x, phi| {
        let mut acc = C64::new(0.0, 0.0);
        for &(l, m, c, a, b) in &terms {
            let radial = r.powi(l as i32) * (1.0 + b * r / r_scale) * (-(a * decay * r)).exp();
            acc += c * radial * real_harmonic(l, m, x, phi);
        }
        acc
    });
    psi.normalize();
    psi
}

/// Gaussian of width `sigma` at the origin with momentum kick `q`.
pub fn gaussian_packet(grid: &Arc<DvrGrid>, sigma: f64, q: [f64; 3]) -> Wavefunction {
    Wavefunction::from_fn(grid, |r, x, phi| {
        let s = (1.0 - x * x).sqrt();
        let pos = [r * s * phi.cos(), r * s * phi.sin(), r * x];
        let phase = q[0] * pos[0] + q[1] * pos[1] + q[2] * pos[2];
        C64::from_polar((-(r * r) / (2.0 * sigma * sigma)).exp(), phase)
    })
}
