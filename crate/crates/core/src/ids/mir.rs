use rand::Rng;

use super::{
    argmin_lowest, check_shapes, floored, policy_moments, ratio_value, segment_min, IRConfig,
};
use crate::env::Environment;
use crate::error::Result;
use crate::infogain::{marg_info_gain, param_info_gain, GainTarget, InfoGainConfig};
use crate::posterior::{regret_vector, ContextDistribution, Policy, Posterior};

#[derive(Debug, Clone, PartialEq)]
pub struct MirSolution {
    pub policy: Policy,
    pub ratio: f64,
    pub exhausted: bool,
    /// Frank-Wolfe gap at the returned policy.
    pub gap: f64,
    pub iterations: usize,
}

struct Edge {
    slope: f64,
    m: usize,
    seq: usize,
    from: usize,
    to: usize,
    dd: f64,
    di: f64,
}

/// Vertices of the upper concave chain of `{(delta_a, gain_a)}` starting at
/// the least-regret (then most-informative) action, kept while the gain
/// strictly increases.
fn upper_chain(delta: &[f64], gain: &[f64]) -> Vec<usize> {
    let k = delta.len();
    let mut start = 0;
    for a in 1..k {
        if delta[a] < delta[start] || (delta[a] == delta[start] && gain[a] > gain[start]) {
            start = a;
        }
    }
    let mut chain = vec![start];
    let mut cur = start;
    loop {
        let mut next: Option<(usize, f64)> = None;
        for a in 0..k {
            if delta[a] <= delta[cur] || gain[a] <= gain[cur] {
                continue;
            }
            let s = (gain[a] - gain[cur]) / (delta[a] - delta[cur]);
            match next {
                None => next = Some((a, s)),
                Some((b, sb)) => {
                    if s > sb || (s == sb && delta[a] > delta[b]) {
                        next = Some((a, s));
                    }
                }
            }
        }
        match next {
            Some((a, _)) => {
                chain.push(a);
                cur = a;
            }
            None => break,
        }
    }
    chain
}

/// Minimizes `max(0, E_xi[delta.pi] - alpha)^lambda / E_xi[gain.pi]` over
/// policies (one simplex per context).
///
/// The objective depends on a policy only through the pair of expectations,
/// and is monotone in each, so the optimum lies on the upper frontier of the
/// Minkowski sum of the per-context polygons. That frontier is traced by
/// merging every context's concave chain in order of decreasing slope; each
/// frontier edge is minimized in closed form. At most one context mixes two
/// actions. Contexts with zero probability get greedy rows.
pub fn minimize_mir(
    deltas: &[Vec<f64>],
    gains: &[Vec<f64>],
    xi: &ContextDistribution,
    cfg: &IRConfig,
) -> Result<MirSolution> {
    cfg.validate()?;
    check_shapes(deltas, gains, xi)?;
    let g: Vec<Vec<f64>> = gains.iter().map(|x| floored(x, cfg.info_floor)).collect();
    let mm = deltas.len();
    let alpha = cfg.alpha;
    let lambda = cfg.lambda;

    let mut vertex: Vec<usize> = deltas.iter().map(|d| argmin_lowest(d)).collect();
    let mut edges = Vec::new();
    let mut d0 = 0.0;
    let mut i0 = 0.0;
    for m in 0..mm {
        let p = xi.probs()[m];
        if p <= 0.0 {
            continue;
        }
        let chain = upper_chain(&deltas[m], &g[m]);
        vertex[m] = chain[0];
        d0 += p * deltas[m][chain[0]];
        i0 += p * g[m][chain[0]];
        for (seq, w) in chain.windows(2).enumerate() {
            let dd = p * (deltas[m][w[1]] - deltas[m][w[0]]);
            let di = p * (g[m][w[1]] - g[m][w[0]]);
            edges.push(Edge {
                slope: di / dd,
                m,
                seq,
                from: w[0],
                to: w[1],
                dd,
                di,
            });
        }
    }
    edges.sort_by(|a, b| {
        b.slope
            .partial_cmp(&a.slope)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.m.cmp(&b.m))
            .then(a.seq.cmp(&b.seq))
    });

    let build = |vertex: &[usize], partial: Option<(&Edge, f64)>| -> Policy {
        let rows = (0..mm)
            .map(|m| {
                let mut r = vec![0.0; deltas[m].len()];
                match partial {
                    Some((e, f)) if e.m == m && f > 0.0 => {
                        r[e.from] += 1.0 - f;
                        r[e.to] += f;
                    }
                    _ => r[vertex[m]] = 1.0,
                }
                r
            })
            .collect();
        Policy::from_rows_unchecked(rows)
    };

    let i_max = i0 + edges.iter().map(|e| e.di).sum::<f64>();
    if i_max <= 0.0 {
        let policy = build(&vertex, None);
        return Ok(MirSolution {
            policy,
            ratio: ratio_value(d0, 0.0, alpha, lambda),
            exhausted: true,
            gap: 0.0,
            iterations: 0,
        });
    }

    let (policy, ratio) = if d0 <= alpha {
        let mut d = d0;
        let mut partial = None;
        for e in &edges {
            if d + e.dd <= alpha {
                d += e.dd;
                vertex[e.m] = e.to;
            } else {
                let f = (alpha - d) / e.dd;
                partial = Some((e, f));
                break;
            }
        }
        (build(&vertex, partial), 0.0)
    } else {
        // best = (number of full edges, fraction of the next edge, value)
        let mut best = (0usize, 0.0f64, ratio_value(d0, i0, alpha, lambda));
        let (mut d, mut i) = (d0, i0);
        for (n, e) in edges.iter().enumerate() {
            let (f, v) = segment_min(d - alpha, e.dd, i, e.di, lambda);
            if v < best.2 {
                best = (n, f, v);
            }
            d += e.dd;
            i += e.di;
        }
        let (n, f, v) = best;
        for e in &edges[..n] {
            vertex[e.m] = e.to;
        }
        let partial = if n < edges.len() && f > 0.0 {
            if f >= 1.0 {
                vertex[edges[n].m] = edges[n].to;
                None
            } else {
                Some((&edges[n], f))
            }
        } else {
            None
        };
        (build(&vertex, partial), v)
    };
    let gap = fw_gap(&policy, deltas, &g, xi, cfg);
    Ok(MirSolution {
        policy,
        ratio,
        exhausted: false,
        gap,
        iterations: edges.len(),
    })
}

fn gradient(
    d: f64,
    i: f64,
    deltas: &[Vec<f64>],
    gains: &[Vec<f64>],
    xi: &ContextDistribution,
    cfg: &IRConfig,
) -> Option<Vec<Vec<f64>>> {
    let n = d - cfg.alpha;
    if n <= 0.0 || i <= 0.0 {
        return None;
    }
    let l = cfg.lambda as i32;
    let gd = cfg.lambda as f64 * n.powi(l - 1) / i;
    let gi = -n.powi(l) / (i * i);
    Some(
        deltas
            .iter()
            .zip(gains)
            .zip(xi.probs())
            .map(|((dm, gm), &p)| {
                dm.iter()
                    .zip(gm)
                    .map(|(a, b)| p * (gd * a + gi * b))
                    .collect()
            })
            .collect(),
    )
}

/// Frank-Wolfe duality gap `<grad, pi - s>` of the ratio at `policy`
/// (zero where the ratio is zero or the gradient is undefined).
pub fn fw_gap(
    policy: &Policy,
    deltas: &[Vec<f64>],
    gains: &[Vec<f64>],
    xi: &ContextDistribution,
    cfg: &IRConfig,
) -> f64 {
    let (d, i) = policy_moments(policy, deltas, gains, xi);
    let Some(grad) = gradient(d, i, deltas, gains, xi, cfg) else {
        return 0.0;
    };
    let mut gap = 0.0;
    for (m, gm) in grad.iter().enumerate() {
        let lin: f64 = policy.row(m).iter().zip(gm).map(|(a, b)| a * b).sum();
        let vmin = gm.iter().copied().fold(f64::INFINITY, f64::min);
        gap += lin - vmin;
    }
    gap.max(0.0)
}

/// Plain Frank-Wolfe on the ratio from the uniform policy, with exact line
/// search along each segment.
pub fn frank_wolfe_mir(
    deltas: &[Vec<f64>],
    gains: &[Vec<f64>],
    xi: &ContextDistribution,
    cfg: &IRConfig,
) -> Result<MirSolution> {
    cfg.validate()?;
    check_shapes(deltas, gains, xi)?;
    let g: Vec<Vec<f64>> = gains.iter().map(|x| floored(x, cfg.info_floor)).collect();
    let sizes: Vec<usize> = deltas.iter().map(Vec::len).collect();
    let mut pi = Policy::uniform(&sizes);
    let mut iters = 0;
    let mut gap = f64::INFINITY;
    while iters < cfg.fw_max_iters {
        iters += 1;
        let (d, i) = policy_moments(&pi, deltas, &g, xi);
        let Some(grad) = gradient(d, i, deltas, &g, xi, cfg) else {
            gap = 0.0;
            break;
        };
        let choice: Vec<usize> = grad.iter().map(|gm| argmin_lowest(gm)).collect();
        let s = Policy::deterministic(&sizes, &choice);
        gap = 0.0;
        for (m, gm) in grad.iter().enumerate() {
            gap += pi.row(m).iter().zip(gm).map(|(a, b)| a * b).sum::<f64>() - gm[choice[m]];
        }
        if gap < cfg.fw_tol {
            break;
        }
        let (ds, is) = policy_moments(&s, deltas, &g, xi);
        let (t, _) = segment_min(d - cfg.alpha, ds - d, i, is - i, cfg.lambda);
        if t <= 0.0 {
            break;
        }
        let rows = pi
            .rows()
            .iter()
            .zip(s.rows())
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (1.0 - t) * x + t * y)
                    .collect()
            })
            .collect();
        pi = Policy::from_rows_unchecked(rows);
    }
    let (d, i) = policy_moments(&pi, deltas, &g, xi);
    Ok(MirSolution {
        ratio: ratio_value(d, i, cfg.alpha, cfg.lambda),
        exhausted: i <= 0.0,
        policy: pi,
        gap,
        iterations: iters,
    })
}

/// Context law putting mass proportional to `counts`.
pub fn empirical_xi(counts: &[usize]) -> Result<ContextDistribution> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return ContextDistribution::new(vec![]);
    }
    ContextDistribution::new(counts.iter().map(|&c| c as f64 / total as f64).collect())
}

/// Draws `w` contexts from the environment's law and minimizes the ratio
/// under their empirical distribution.
pub fn sampled_mir_policy<R: Rng + ?Sized>(
    post: &Posterior,
    env: &Environment,
    w: usize,
    cfg: &IRConfig,
    gain_cfg: &InfoGainConfig,
    rng: &mut R,
) -> Result<MirSolution> {
    if w == 0 {
        return Err(crate::error::Error::invalid(
            "sample count w must be at least 1",
        ));
    }
    let mut counts = vec![0usize; env.num_contexts()];
    for _ in 0..w {
        counts[env.xi().sample(rng)] += 1;
    }
    let xi_hat = empirical_xi(&counts)?;
    let (deltas, gains) = contextual_inputs(post, env, gain_cfg)?;
    minimize_mir(&deltas, &gains, &xi_hat, cfg)
}

/// Per-context regret vectors and per-context slices of the marginal (or
/// parameter) gains.
pub fn contextual_inputs(
    post: &Posterior,
    env: &Environment,
    gain_cfg: &InfoGainConfig,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let deltas = (0..env.num_contexts())
        .map(|m| regret_vector(post, m, env))
        .collect::<Result<Vec<_>>>()?;
    let all = match gain_cfg.target {
        GainTarget::Parameter => param_info_gain(post, env, gain_cfg)?,
        _ => marg_info_gain(post, env, gain_cfg)?,
    };
    let gains = (0..env.num_contexts())
        .map(|m| env.actions(m).iter().map(|&a| all.values[a]).collect())
        .collect();
    Ok((deltas, gains))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::minimize_cir;

    #[test]
    fn single_context_matches_cir() {
        let d = vec![vec![0.3, 0.05, 1.0, 0.6]];
        let g = vec![vec![0.1, 0.0, 1.0, 0.7]];
        let xi = ContextDistribution::new(vec![1.0]).unwrap();
        for lambda in [2, 3] {
            let cfg = IRConfig::new(0.0, lambda);
            let a = minimize_mir(&d, &g, &xi, &cfg).unwrap();
            let b = minimize_cir(&d[0], &g[0], &cfg).unwrap();
            assert!((a.ratio - b.ratio).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_regret_maximizes_gain() {
        let d = vec![vec![0.0, 0.0], vec![0.0, 0.0, 0.0]];
        let g = vec![vec![0.2, 0.5], vec![0.1, 0.0, 0.3]];
        let xi = ContextDistribution::new(vec![0.5, 0.5]).unwrap();
        let s = minimize_mir(&d, &g, &xi, &IRConfig::default()).unwrap();
        assert_eq!(s.ratio, 0.0);
        assert_eq!(s.policy.row(0), &[0.0, 1.0]);
        assert_eq!(s.policy.row(1), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn zero_probability_context_is_greedy() {
        let d = vec![vec![0.5, 0.1], vec![0.2, 0.0]];
        let g = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        let xi = ContextDistribution::new(vec![1.0, 0.0]).unwrap();
        let s = minimize_mir(&d, &g, &xi, &IRConfig::default()).unwrap();
        assert_eq!(s.policy.row(1), &[0.0, 1.0]);
    }

    #[test]
    fn frank_wolfe_agrees_with_frontier() {
        let d = vec![vec![0.4, 0.1, 0.9], vec![0.2, 0.7, 0.05]];
        let g = vec![vec![0.3, 0.02, 0.8], vec![0.1, 0.9, 0.0]];
        let xi = ContextDistribution::new(vec![0.3, 0.7]).unwrap();
        for lambda in [2, 3] {
            let mut cfg = IRConfig::new(0.0, lambda);
            cfg.fw_max_iters = 20_000;
            cfg.fw_tol = 1e-12;
            let a = minimize_mir(&d, &g, &xi, &cfg).unwrap();
            let b = frank_wolfe_mir(&d, &g, &xi, &cfg).unwrap();
            assert!(a.ratio <= b.ratio + 1e-12);
            assert!(b.ratio - a.ratio < 1e-4, "{} vs {}", a.ratio, b.ratio);
            assert!(a.gap < 1e-9, "gap {}", a.gap);
        }
    }

    #[test]
    fn exhausted_when_no_gain() {
        let d = vec![vec![0.5, 0.1]];
        let g = vec![vec![0.0, 0.0]];
        let xi = ContextDistribution::new(vec![1.0]).unwrap();
        let s = minimize_mir(&d, &g, &xi, &IRConfig::default()).unwrap();
        assert!(s.exhausted);
        assert_eq!(s.policy.row(0), &[0.0, 1.0]);
    }

    #[test]
    fn empirical_xi_counts() {
        let x = empirical_xi(&[1, 3, 0]).unwrap();
        assert_eq!(x.probs(), &[0.25, 0.75, 0.0]);
    }
}
