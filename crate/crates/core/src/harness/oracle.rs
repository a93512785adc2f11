//! Exhaustive grid search over products of simplices. Slow on purpose;
//! used to cross-check the ratio minimizers.

use crate::error::{Error, Result};
use crate::ids::{floored, ratio_value};
use crate::posterior::{ContextDistribution, Policy};

pub const GRID_LIMIT: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub policy: Policy,
    pub value: f64,
    pub points: u128,
}

fn binom(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// All ways to split `n` units over `k` slots, in lexicographic order of
/// the first slot's count descending.
fn compositions(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 1 {
        return vec![vec![n]];
    }
    let mut out = Vec::new();
    for first in (0..=n).rev() {
        for mut rest in compositions(n - first, k - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn grid_steps(resolution: f64) -> Result<usize> {
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::invalid("resolution must lie in (0, 1]"));
    }
    let n = (1.0 / resolution).round();
    if (n * resolution - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("1 / resolution must be an integer"));
    }
    Ok(n as usize)
}

/// Number of grid points for the given context sizes.
pub fn grid_size(sizes: &[usize], resolution: f64) -> Result<u128> {
    let n = grid_steps(resolution)? as u128;
    let mut total: u128 = 1;
    for &k in sizes {
        total = total.saturating_mul(binom(n + k as u128 - 1, k as u128 - 1));
    }
    Ok(total)
}

/// Minimizes the information ratio over every policy whose probabilities
/// are multiples of `resolution`. Ties keep the first point visited.
pub fn oracle_gridsearch_mir(
    deltas: &[Vec<f64>],
    gains: &[Vec<f64>],
    xi: &ContextDistribution,
    alpha: f64,
    lambda: u32,
    resolution: f64,
    info_floor: f64,
) -> Result<OracleResult> {
    if deltas.len() != gains.len()
        || deltas.len() != xi.len()
        || deltas
            .iter()
            .zip(gains)
            .any(|(d, g)| d.len() != g.len() || d.is_empty())
    {
        return Err(Error::invalid("deltas, gains and xi disagree in shape"));
    }
    let sizes: Vec<usize> = deltas.iter().map(Vec::len).collect();
    let points = grid_size(&sizes, resolution)?;
    if points > GRID_LIMIT {
        return Err(Error::GridTooLarge(points));
    }
    let n = grid_steps(resolution)?;
    let gains: Vec<Vec<f64>> = gains.iter().map(|g| floored(g, info_floor)).collect();
    // Per context: candidate rows and their xi-weighted moments.
    let per: Vec<Vec<(Vec<usize>, f64, f64)>> = (0..deltas.len())
        .map(|m| {
            let p = xi.probs()[m];
            compositions(n, sizes[m])
                .into_iter()
                .map(|c| {
                    let d: f64 = c
                        .iter()
                        .zip(&deltas[m])
                        .map(|(&u, x)| u as f64 * x)
                        .sum::<f64>()
                        / n as f64;
                    let i: f64 = c
                        .iter()
                        .zip(&gains[m])
                        .map(|(&u, x)| u as f64 * x)
                        .sum::<f64>()
                        / n as f64;
                    (c, p * d, p * i)
                })
                .collect()
        })
        .collect();
    let mut idx = vec![0usize; per.len()];
    let mut best = (f64::INFINITY, idx.clone());
    loop {
        let (mut d, mut i) = (0.0, 0.0);
        for (m, &j) in idx.iter().enumerate() {
            d += per[m][j].1;
            i += per[m][j].2;
        }
        let v = ratio_value(d, i, alpha, lambda);
        if v < best.0 {
            best = (v, idx.clone());
        }
        let mut m = 0;
        loop {
            if m == idx.len() {
                let rows = best
                    .1
                    .iter()
                    .enumerate()
                    .map(|(m, &j)| per[m][j].0.iter().map(|&u| u as f64 / n as f64).collect())
                    .collect();
                return Ok(OracleResult {
                    policy: Policy::new(rows)?,
                    value: best.0,
                    points,
                });
            }
            idx[m] += 1;
            if idx[m] < per[m].len() {
                break;
            }
            idx[m] = 0;
            m += 1;
        }
    }
}

/// Single-simplex version, enumerated without materializing the grid.
pub fn oracle_gridsearch_cir(
    delta: &[f64],
    gain: &[f64],
    alpha: f64,
    lambda: u32,
    resolution: f64,
    info_floor: f64,
) -> Result<(Vec<f64>, f64)> {
    if delta.len() != gain.len() || delta.is_empty() {
        return Err(Error::invalid("delta and gain disagree in shape"));
    }
    let points = grid_size(&[delta.len()], resolution)?;
    if points > GRID_LIMIT {
        return Err(Error::GridTooLarge(points));
    }
    let n = grid_steps(resolution)?;
    let g = floored(gain, info_floor);
    struct Search<'a> {
        delta: &'a [f64],
        gain: &'a [f64],
        n: usize,
        alpha: f64,
        lambda: u32,
        cur: Vec<usize>,
        best: (f64, Vec<usize>),
    }
    fn go(s: &mut Search, j: usize, left: usize, d: f64, i: f64) {
        let k = s.delta.len();
        if j + 1 == k {
            s.cur[j] = left;
            let d = (d + left as f64 * s.delta[j]) / s.n as f64;
            let i = (i + left as f64 * s.gain[j]) / s.n as f64;
            let v = ratio_value(d, i, s.alpha, s.lambda);
            if v < s.best.0 {
                s.best = (v, s.cur.clone());
            }
            return;
        }
        for u in (0..=left).rev() {
            s.cur[j] = u;
            go(
                s,
                j + 1,
                left - u,
                d + u as f64 * s.delta[j],
                i + u as f64 * s.gain[j],
            );
        }
    }
    let mut s = Search {
        delta,
        gain: &g,
        n,
        alpha,
        lambda,
        cur: vec![0; delta.len()],
        best: (f64::INFINITY, vec![0; delta.len()]),
    };
    go(&mut s, 0, n, 0.0, 0.0);
    Ok((
        s.best.1.iter().map(|&u| u as f64 / n as f64).collect(),
        s.best.0,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_points() {
        let xi = ContextDistribution::uniform(1).unwrap();
        let r = oracle_gridsearch_mir(
            &[vec![0.0, 1.0]],
            &[vec![1.0, 1.0]],
            &xi,
            0.0,
            2,
            0.5,
            1e-12,
        )
        .unwrap();
        assert_eq!(r.points, 3);
        assert_eq!(r.value, 0.0);
        assert_eq!(grid_size(&[3, 3], 0.02).unwrap(), 1326 * 1326);
    }

    #[test]
    fn zero_regret_gives_zero() {
        let xi = ContextDistribution::uniform(2).unwrap();
        let r = oracle_gridsearch_mir(
            &[vec![0.0; 3], vec![0.0; 2]],
            &[vec![0.1, 0.2, 0.3], vec![0.0, 0.5]],
            &xi,
            0.0,
            2,
            0.1,
            1e-12,
        )
        .unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn rejects_huge_grids() {
        let xi = ContextDistribution::uniform(2).unwrap();
        let e = oracle_gridsearch_mir(
            &[vec![0.0; 10], vec![0.0; 10]],
            &[vec![1.0; 10], vec![1.0; 10]],
            &xi,
            0.0,
            2,
            0.01,
            1e-12,
        );
        assert!(matches!(e, Err(Error::GridTooLarge(_))));
    }

    #[test]
    fn finds_the_pair_mix() {
        let (row, v) =
            oracle_gridsearch_cir(&[0.5, 0.2], &[1.0, 0.1], 0.0, 2, 0.001, 1e-12).unwrap();
        let exact = (0..=1000)
            .map(|j| {
                let p = j as f64 / 1000.0;
                ratio_value(0.5 * p + 0.2 * (1.0 - p), p + 0.1 * (1.0 - p), 0.0, 2)
            })
            .fold(f64::INFINITY, f64::min);
        assert!((v - exact).abs() < 1e-12);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
