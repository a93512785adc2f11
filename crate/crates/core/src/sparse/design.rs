//! Maximizing the smallest eigenvalue of the expected feature second moment
//! over policies.
//!
//! Lower bounds come from the iterate. Upper bounds come from duality: for
//! any density matrix `Z` (PSD, unit trace),
//! `max_pi lambda_min(M(pi)) <= sum_m xi_m max_a phi_ma' Z phi_ma`.
//! We search mixtures of rank-one `Z` built from the current eigenbasis
//! with a small LP.

use super::eigen::{symmetric_eigen, SymEigen};
use super::FeatureMap;
use crate::error::{Error, Result};
use crate::lp;
use crate::posterior::{ContextDistribution, Policy};

#[derive(Debug, Clone, PartialEq)]
pub struct DesignResult {
    pub value: f64,
    pub witness: Policy,
    pub iterations: usize,
    /// Upper bound minus `value`.
    pub certificate_gap: f64,
    pub upper_bound: f64,
    /// The features do not span the space, so the optimum is 0.
    pub rank_deficient: bool,
}

fn second_moment(f: &FeatureMap, xi: &ContextDistribution, pi: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = f.d();
    let mut m = vec![vec![0.0; d]; d];
    for (c, row) in pi.iter().enumerate() {
        let p = xi.probs()[c];
        if p <= 0.0 {
            continue;
        }
        for (a, &w) in row.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            let phi = f.phi(c, a);
            for i in 0..d {
                let s = p * w * phi[i];
                if s == 0.0 {
                    continue;
                }
                for j in 0..d {
                    m[i][j] += s * phi[j];
                }
            }
        }
    }
    m
}

fn min_eig(f: &FeatureMap, xi: &ContextDistribution, pi: &[Vec<f64>]) -> (f64, SymEigen) {
    let e = symmetric_eigen(&second_moment(f, xi, pi));
    (e.values[0], e)
}

fn quad(phi: &[f64], v: &[f64]) -> f64 {
    let s: f64 = phi.iter().zip(v).map(|(a, b)| a * b).sum();
    s * s
}

/// Best bound `sum_m xi_m max_a phi' Z phi` over `Z = sum_i alpha_i v_i v_i'`
/// with `alpha` in the simplex, for the eigenvectors `vs`.
pub fn design_upper_bound(
    f: &FeatureMap,
    xi: &ContextDistribution,
    vs: &[Vec<f64>],
) -> Result<f64> {
    let q = vs.len();
    let live: Vec<usize> = (0..f.num_contexts())
        .filter(|&m| xi.probs()[m] > 0.0)
        .collect();
    let nt = live.len();
    // Variables: beta_1..beta_q, t_1..t_nt.
    let nvar = q + nt;
    let mut c = vec![0.0; nvar];
    for x in c.iter_mut().take(q) {
        *x = 1.0;
    }
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (ti, &m) in live.iter().enumerate() {
        for phi in f.context(m) {
            let mut row = vec![0.0; nvar];
            for (i, v) in vs.iter().enumerate() {
                row[i] = quad(phi, v);
            }
            row[q + ti] = -1.0;
            a.push(row);
            b.push(0.0);
        }
    }
    let mut row = vec![0.0; nvar];
    for (ti, &m) in live.iter().enumerate() {
        row[q + ti] = xi.probs()[m];
    }
    a.push(row);
    b.push(1.0);
    let sol = lp::maximize(&c, &a, &b)?;
    if sol.objective <= 0.0 {
        return Ok(f64::INFINITY);
    }
    // The LP optimum can be slightly off; recompute the bound at its alpha.
    let total: f64 = sol.x[..q].iter().sum();
    let alpha: Vec<f64> = sol.x[..q].iter().map(|x| x / total).collect();
    let mut u = 0.0;
    for &m in &live {
        let best = f
            .context(m)
            .iter()
            .map(|phi| {
                vs.iter()
                    .zip(&alpha)
                    .map(|(v, w)| w * quad(phi, v))
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        u += xi.probs()[m] * best;
    }
    Ok(u)
}

/// `max t` subject to `t <= v' M(pi) v` for every cut `v`. The optimum bounds
/// `c_min` from above; returns the maximizing design (rows renormalized) and
/// the LP value.
fn cut_lp(
    f: &FeatureMap,
    xi: &ContextDistribution,
    cuts: &[Vec<f64>],
) -> Result<(Vec<Vec<f64>>, f64)> {
    let sizes = f.sizes();
    let offsets: Vec<usize> = sizes
        .iter()
        .scan(0, |acc, &k| {
            let o = *acc;
            *acc += k;
            Some(o)
        })
        .collect();
    let nvar = sizes.iter().sum::<usize>() + 1;
    let tcol = nvar - 1;
    let mut c = vec![0.0; nvar];
    c[tcol] = 1.0;
    let mut a = Vec::with_capacity(cuts.len() + sizes.len());
    let mut b = Vec::with_capacity(cuts.len() + sizes.len());
    for v in cuts {
        let mut row = vec![0.0; nvar];
        row[tcol] = 1.0;
        for (m, &o) in offsets.iter().enumerate() {
            for (j, phi) in f.context(m).iter().enumerate() {
                row[o + j] = -xi.probs()[m] * quad(phi, v);
            }
        }
        a.push(row);
        b.push(0.0);
    }
    for (m, &o) in offsets.iter().enumerate() {
        let mut row = vec![0.0; nvar];
        for x in &mut row[o..o + sizes[m]] {
            *x = 1.0;
        }
        a.push(row);
        b.push(1.0);
    }
    let sol = lp::maximize(&c, &a, &b)?;
    let rows = offsets
        .iter()
        .zip(&sizes)
        .map(|(&o, &k)| {
            let r = &sol.x[o..o + k];
            let s: f64 = r.iter().sum();
            if s > 0.0 {
                r.iter().map(|x| x / s).collect()
            } else {
                vec![1.0 / k as f64; k]
            }
        })
        .collect();
    Ok((rows, sol.x[tcol]))
}

/// Eigenvectors plus rotations inside the bottom cluster, where the
/// optimal dual matrix usually lives and need not be diagonal.
fn candidates(e: &SymEigen) -> Vec<Vec<f64>> {
    let n = e.values.len();
    let spread = (e.values[n - 1] - e.values[0]).max(1e-12);
    let low: Vec<usize> = (0..n.min(4))
        .filter(|&i| e.values[i] - e.values[0] <= 0.25 * spread)
        .collect();
    let mut out = e.vectors.clone();
    for (x, &i) in low.iter().enumerate() {
        for &j in &low[x + 1..] {
            for k in 1..32 {
                if k == 16 {
                    continue;
                }
                let t = std::f64::consts::PI * k as f64 / 32.0;
                let (c, s) = (t.cos(), t.sin());
                out.push(
                    e.vectors[i]
                        .iter()
                        .zip(&e.vectors[j])
                        .map(|(a, b)| c * a + s * b)
                        .collect(),
                );
            }
        }
    }
    out
}

fn golden_max<F: Fn(f64) -> f64>(f: F, hi: f64, iters: usize) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, hi);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        }
    }
    let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    for x in [0.0, hi] {
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

fn step(pi: &[Vec<f64>], dir: &[Vec<f64>], t: f64) -> Vec<Vec<f64>> {
    pi.iter()
        .zip(dir)
        .map(|(r, d)| r.iter().zip(d).map(|(x, y)| (x + t * y).max(0.0)).collect())
        .collect()
}

/// Soft-min eigenvalue `-mu ln sum exp(-lambda_i / mu)` and its gradient
/// weights (a density matrix in the eigenbasis).
fn soft_min(e: &SymEigen, mu: f64) -> (f64, Vec<f64>) {
    let l0 = e.values[0];
    let w: Vec<f64> = e.values.iter().map(|l| (-(l - l0) / mu).exp()).collect();
    let s: f64 = w.iter().sum();
    (l0 - mu * s.ln(), w.iter().map(|x| x / s).collect())
}

/// Frank-Wolfe with away steps on `pi -> lambda_min(M(pi))`, then a
/// smoothed phase if the duality certificate is still loose.
pub fn c_min(
    f: &FeatureMap,
    xi: &ContextDistribution,
    max_iters: usize,
    tol: f64,
) -> Result<DesignResult> {
    if xi.len() != f.num_contexts() {
        return Err(Error::invalid("need one probability per feature context"));
    }
    let d = f.d();
    let sizes = f.sizes();
    let uniform: Vec<Vec<f64>> = sizes.iter().map(|&k| vec![1.0 / k as f64; k]).collect();

    let gram = {
        let full: Vec<Vec<f64>> = sizes.iter().map(|&k| vec![1.0; k]).collect();
        second_moment(f, xi, &full)
    };
    let ge = symmetric_eigen(&gram);
    let trace: f64 = (0..d).map(|i| gram[i][i]).sum();
    if ge.values[0] <= 1e-12 * trace.max(1e-300) {
        return Ok(DesignResult {
            value: 0.0,
            witness: Policy::new(uniform)?,
            iterations: 0,
            certificate_gap: 0.0,
            upper_bound: 0.0,
            rank_deficient: true,
        });
    }

    let mut pi = uniform;
    let (mut val, mut eig) = min_eig(f, xi, &pi);
    let mut upper = design_upper_bound(f, xi, &candidates(&eig))?;
    let mut iters = 0;
    let score = |pi: &[Vec<f64>],
                 z: &dyn Fn(&[f64]) -> f64|
     -> (Vec<Vec<f64>>, f64, f64, Vec<usize>, Vec<usize>) {
        let mut sc = Vec::with_capacity(pi.len());
        let (mut fw, mut aw) = (0.0, 0.0);
        let mut fw_v = Vec::new();
        let mut aw_v = Vec::new();
        for (m, row) in pi.iter().enumerate() {
            let s: Vec<f64> = f.context(m).iter().map(|phi| z(phi)).collect();
            let p = xi.probs()[m];
            let cur: f64 = row.iter().zip(&s).map(|(a, b)| a * b).sum();
            let mut best = 0;
            let mut worst: Option<usize> = None;
            for a in 0..s.len() {
                if s[a] > s[best] {
                    best = a;
                }
                if row[a] > 0.0 && worst.is_none_or(|w| s[a] < s[w]) {
                    worst = Some(a);
                }
            }
            let worst = worst.unwrap_or(best);
            fw += p * (s[best] - cur);
            aw += p * (cur - s[worst]);
            fw_v.push(best);
            aw_v.push(worst);
            sc.push(s);
        }
        (sc, fw, aw, fw_v, aw_v)
    };

    while iters < max_iters && upper - val > tol {
        iters += 1;
        let v0 = eig.vectors[0].clone();
        let (_, fw, aw, fw_v, aw_v) = score(&pi, &|phi| quad(phi, &v0));
        let (dir, hi) = if fw >= aw {
            let dir: Vec<Vec<f64>> = pi
                .iter()
                .zip(&fw_v)
                .map(|(r, &b)| {
                    r.iter()
                        .enumerate()
                        .map(|(a, &x)| if a == b { 1.0 - x } else { -x })
                        .collect()
                })
                .collect();
            (dir, 1.0)
        } else {
            let mut hi = f64::INFINITY;
            let dir: Vec<Vec<f64>> = pi
                .iter()
                .zip(&aw_v)
                .enumerate()
                .map(|(m, (r, &w))| {
                    if xi.probs()[m] <= 0.0 || r[w] >= 1.0 {
                        return vec![0.0; r.len()];
                    }
                    hi = hi.min(r[w] / (1.0 - r[w]));
                    r.iter()
                        .enumerate()
                        .map(|(a, &x)| if a == w { x - 1.0 } else { x })
                        .collect()
                })
                .collect();
            if !hi.is_finite() {
                break;
            }
            (dir, hi)
        };
        let (t, v) = golden_max(|t| min_eig(f, xi, &step(&pi, &dir, t)).0, hi, 60);
        if t > 0.0 && v > val {
            pi = step(&pi, &dir, t);
            let (nv, ne) = min_eig(f, xi, &pi);
            val = nv;
            eig = ne;
            upper = upper.min(design_upper_bound(f, xi, &candidates(&eig))?);
        } else {
            break;
        }
    }

    if upper - val > tol {
        let mut cuts = candidates(&eig);
        for i in 0..d {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            cuts.push(e);
        }
        let mut rounds = 0;
        while rounds < max_iters && upper - val > tol {
            rounds += 1;
            let (lp_pi, lp_val) = cut_lp(f, xi, &cuts)?;
            upper = upper.min(lp_val);
            // Query the LP point and a point halfway back to the incumbent;
            // the latter keeps the cuts near the optimum.
            let mid: Vec<Vec<f64>> = pi
                .iter()
                .zip(&lp_pi)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect())
                .collect();
            for q in [lp_pi, mid] {
                let (v, e) = min_eig(f, xi, &q);
                if v > val {
                    val = v;
                    pi = q;
                }
                let floor = e.values[0] + 1e-9 * (1.0 + e.values[0].abs());
                for (i, vec) in e.vectors.iter().enumerate() {
                    if i == 0 || e.values[i] <= floor {
                        cuts.push(vec.clone());
                    }
                }
            }
        }
        iters += rounds;
    }

    // Smoothed phase: exponentiated-gradient ascent on the soft-min
    // eigenvalue, with backtracking and a decreasing temperature.
    if upper - val > tol {
        let spread = (ge.values[d - 1] - ge.values[0]).max(1e-12);
        let phi_sq = (0..f.num_contexts())
            .flat_map(|m| {
                f.context(m)
                    .iter()
                    .map(|p| p.iter().map(|x| x * x).sum::<f64>())
            })
            .fold(0.0, f64::max);
        let mut eta = 1.0 / phi_sq.max(1e-12);
        let mut mu = 0.05 * spread;
        let mut cur: Vec<Vec<f64>> = pi
            .iter()
            .map(|r| r.iter().map(|x| 0.9 * x + 0.1 / r.len() as f64).collect())
            .collect();
        while iters < max_iters && upper - val > tol && mu > 1e-10 * spread {
            for _ in 0..300 {
                if iters >= max_iters || upper - val <= tol {
                    break;
                }
                iters += 1;
                let e = symmetric_eigen(&second_moment(f, xi, &cur));
                let (obj, w) = soft_min(&e, mu);
                let grads: Vec<Vec<f64>> = (0..cur.len())
                    .map(|m| {
                        f.context(m)
                            .iter()
                            .map(|phi| {
                                xi.probs()[m]
                                    * e.vectors
                                        .iter()
                                        .zip(&w)
                                        .map(|(v, wi)| wi * quad(phi, v))
                                        .sum::<f64>()
                            })
                            .collect()
                    })
                    .collect();
                let mut moved = false;
                while eta > 1e-12 {
                    let next: Vec<Vec<f64>> = cur
                        .iter()
                        .zip(&grads)
                        .map(|(r, g)| {
                            let top = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                            let u: Vec<f64> = r
                                .iter()
                                .zip(g)
                                .map(|(x, gi)| x * (eta * (gi - top)).exp())
                                .collect();
                            let z: f64 = u.iter().sum();
                            u.into_iter().map(|x| x / z).collect()
                        })
                        .collect();
                    let ne = symmetric_eigen(&second_moment(f, xi, &next));
                    if soft_min(&ne, mu).0 >= obj {
                        cur = next;
                        eta *= 1.5;
                        moved = true;
                        if ne.values[0] > val {
                            val = ne.values[0];
                            pi = cur.clone();
                        }
                        upper = upper.min(design_upper_bound(f, xi, &candidates(&ne))?);
                        break;
                    }
                    eta *= 0.5;
                }
                if !moved {
                    break;
                }
            }
            mu *= 0.3;
        }
    }

    let rows: Vec<Vec<f64>> = pi
        .into_iter()
        .map(|r| {
            let s: f64 = r.iter().sum();
            r.into_iter().map(|x| x / s).collect()
        })
        .collect();
    let value = min_eig(f, xi, &rows).0.max(0.0);
    let upper = upper.max(value);
    Ok(DesignResult {
        value,
        witness: Policy::new(rows)?,
        iterations: iters,
        certificate_gap: upper - value,
        upper_bound: upper,
        rank_deficient: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_basis_single_context() {
        // e1, e2, e3 with one context: optimum spreads mass evenly, value 1/3.
        let f = FeatureMap::new(vec![vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ]])
        .unwrap();
        let xi = ContextDistribution::uniform(1).unwrap();
        let r = c_min(&f, &xi, 200, 1e-9).unwrap();
        assert!((r.value - 1.0 / 3.0).abs() < 1e-9);
        assert!(r.certificate_gap < 1e-8);
    }

    #[test]
    fn rank_deficient_is_zero() {
        let f = FeatureMap::new(vec![vec![vec![1.0, 1.0], vec![2.0, 2.0]]]).unwrap();
        let xi = ContextDistribution::uniform(1).unwrap();
        let r = c_min(&f, &xi, 100, 1e-9).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.rank_deficient);
    }

    #[test]
    fn skewed_design_converges() {
        let f = FeatureMap::new(vec![
            vec![vec![1.0, 0.2], vec![0.1, 0.9], vec![0.7, 0.7]],
            vec![vec![0.0, 1.0], vec![1.0, -1.0]],
        ])
        .unwrap();
        let xi = ContextDistribution::new(vec![0.6, 0.4]).unwrap();
        let r = c_min(&f, &xi, 2000, 1e-7).unwrap();
        assert!(r.value <= r.upper_bound + 1e-12);
        assert!(
            r.certificate_gap < 1e-4,
            "gap {} value {} upper {} it {}",
            r.certificate_gap,
            r.value,
            r.upper_bound,
            r.iterations
        );
    }
}
