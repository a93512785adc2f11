//! Gauss-Hermite rules for expectations under a standard normal.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Nodes `x_i` and weights `w_i` with `E[f(Z)] ~ sum w_i f(x_i)`, `Z ~ N(0,1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Builds the `n`-point rule by Newton iteration on the orthonormal
    /// Hermite recurrence, then rescales from `exp(-x^2)` to the normal law.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let pim4 = PI.powf(-0.25);
        let m = n.div_ceil(2);
        let nf = n as f64;
        let mut z = 0.0f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        let s2 = std::f64::consts::SQRT_2;
        let norm = PI.sqrt();
        let mut nodes: Vec<f64> = x.iter().map(|&v| v * s2).collect();
        let mut weights: Vec<f64> = w.iter().map(|&v| v / norm).collect();
        nodes.reverse();
        weights.reverse();
        Self { nodes, weights }
    }

    /// Shared rule for `n` nodes.
    pub fn cached(n: usize) -> Arc<GaussHermite> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussHermite>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut g = cache.lock().unwrap_or_else(|e| e.into_inner());
        Arc::clone(g.entry(n).or_insert_with(|| Arc::new(GaussHermite::new(n))))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_one() {
        for n in [8, 16, 64, 100] {
            let g = GaussHermite::new(n);
            let s: f64 = g.weights.iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "n={n} sum={s}");
        }
    }

    #[test]
    fn normal_moments() {
        let g = GaussHermite::new(32);
        let m = |k: i32| -> f64 {
            g.nodes
                .iter()
                .zip(&g.weights)
                .map(|(x, w)| w * x.powi(k))
                .sum()
        };
        assert!(m(1).abs() < 1e-12);
        assert!((m(2) - 1.0).abs() < 1e-11);
        assert!((m(4) - 3.0).abs() < 1e-10);
        assert!((m(6) - 15.0).abs() < 1e-9);
    }

    #[test]
    fn nodes_are_sorted_and_symmetric() {
        let g = GaussHermite::new(9);
        for w in g.nodes.windows(2) {
            assert!(w[0] < w[1]);
        }
        for i in 0..9 {
            assert!((g.nodes[i] + g.nodes[8 - i]).abs() < 1e-12);
        }
        assert!(g.nodes[4].abs() < 1e-12);
    }
}
