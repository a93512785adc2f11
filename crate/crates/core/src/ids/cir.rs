use super::{argmin_lowest, floored, ratio_value, segment_min, IRConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CirSolution {
    pub probs: Vec<f64>,
    pub ratio: f64,
    /// No action carried information; the greedy action was returned.
    pub exhausted: bool,
}

/// Minimizes `max(0, delta.pi - alpha)^lambda / (gain.pi)` over the simplex.
///
/// The map `pi -> (delta.pi, gain.pi)` sends the simplex onto a polygon and
/// the ratio only improves with lower regret and higher gain, so an optimum
/// sits on an edge between two vertices. Every pair is scanned with the
/// closed-form stationary mixing weight.
pub fn minimize_cir(delta: &[f64], gain: &[f64], cfg: &IRConfig) -> Result<CirSolution> {
    cfg.validate()?;
    if delta.is_empty() || delta.len() != gain.len() {
        return Err(Error::invalid(
            "regret and gain vectors must be nonempty and equal length",
        ));
    }
    if delta.iter().chain(gain).any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::invalid(
            "regrets and gains must be finite and nonnegative",
        ));
    }
    let g = floored(gain, cfg.info_floor);
    let k = delta.len();
    let alpha = cfg.alpha;
    let lambda = cfg.lambda;
    let greedy = argmin_lowest(delta);

    if g.iter().all(|&x| x == 0.0) {
        let mut probs = vec![0.0; k];
        probs[greedy] = 1.0;
        return Ok(CirSolution {
            probs,
            ratio: ratio_value(delta[greedy], 0.0, alpha, lambda),
            exhausted: true,
        });
    }

    let mut probs = vec![0.0; k];
    if delta[greedy] <= alpha {
        // Zero ratio is attainable: keep regret within budget, maximize gain.
        let mut best = (greedy, greedy, 0.0, g[greedy]);
        for i in 0..k {
            if delta[i] <= alpha && g[i] > best.3 {
                best = (i, i, 0.0, g[i]);
            }
        }
        for i in 0..k {
            if delta[i] > alpha {
                continue;
            }
            for j in 0..k {
                if delta[j] <= alpha || g[j] <= g[i] {
                    continue;
                }
                let q = (alpha - delta[i]) / (delta[j] - delta[i]);
                let val = g[i] + q * (g[j] - g[i]);
                if val > best.3 {
                    best = (i, j, q, val);
                }
            }
        }
        let (i, j, q, _) = best;
        probs[i] += 1.0 - q;
        probs[j] += q;
        return Ok(CirSolution {
            probs,
            ratio: 0.0,
            exhausted: false,
        });
    }

    let mut best = (0usize, 0usize, 0.0f64, f64::INFINITY);
    for i in 0..k {
        if g[i] > 0.0 {
            let v = ratio_value(delta[i], g[i], alpha, lambda);
            if v < best.3 {
                best = (i, i, 0.0, v);
            }
        }
    }
    for i in 0..k {
        for j in (i + 1)..k {
            if g[i] == 0.0 && g[j] == 0.0 {
                continue;
            }
            let (p, v) = segment_min(
                delta[i] - alpha,
                delta[j] - delta[i],
                g[i],
                g[j] - g[i],
                lambda,
            );
            if p > 0.0 && p < 1.0 && v < best.3 {
                best = (i, j, p, v);
            }
        }
    }
    let (i, j, p, v) = best;
    probs[i] += 1.0 - p;
    probs[j] += p;
    Ok(CirSolution {
        probs,
        ratio: v,
        exhausted: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_ratio(delta: &[f64], gain: &[f64], cfg: &IRConfig, steps: usize) -> f64 {
        let k = delta.len();
        assert_eq!(k, 3);
        let mut best = f64::INFINITY;
        for a in 0..=steps {
            for b in 0..=(steps - a) {
                let p = [
                    a as f64 / steps as f64,
                    b as f64 / steps as f64,
                    (steps - a - b) as f64 / steps as f64,
                ];
                let d: f64 = p.iter().zip(delta).map(|(x, y)| x * y).sum();
                let i: f64 = p.iter().zip(gain).map(|(x, y)| x * y).sum();
                best = best.min(ratio_value(d, i, cfg.alpha, cfg.lambda));
            }
        }
        best
    }

    #[test]
    fn zero_regret_informative_action_wins() {
        let s = minimize_cir(&[0.0, 1.0], &[1.0, 1.0], &IRConfig::default()).unwrap();
        assert_eq!(s.probs, vec![1.0, 0.0]);
        assert_eq!(s.ratio, 0.0);
    }

    #[test]
    fn equal_regret_prefers_more_information() {
        let s = minimize_cir(&[1.0, 1.0], &[1.0, 2.0], &IRConfig::default()).unwrap();
        assert_eq!(s.probs, vec![0.0, 1.0]);
        assert!((s.ratio - 0.5).abs() < 1e-15);
    }

    #[test]
    fn three_action_case_matches_grid() {
        let delta = [0.3, 0.0, 1.0];
        let gain = [0.1, 0.0, 1.0];
        let cfg = IRConfig::default();
        let s = minimize_cir(&delta, &gain, &cfg).unwrap();
        // Action 1 has zero regret, so the ratio is zero and the tie-break
        // maximizes information subject to zero regret.
        assert_eq!(s.ratio, 0.0);
        assert_eq!(s.probs, vec![0.0, 1.0, 0.0]);
        assert!(s.ratio <= grid_ratio(&delta, &gain, &cfg, 1000) + 1e-6);
    }

    #[test]
    fn interior_mix_beats_grid() {
        let delta = [0.3, 0.05, 1.0];
        let gain = [0.1, 0.0, 1.0];
        for lambda in [2, 3] {
            let cfg = IRConfig::new(0.0, lambda);
            let s = minimize_cir(&delta, &gain, &cfg).unwrap();
            assert!(s.ratio <= grid_ratio(&delta, &gain, &cfg, 1000) + 1e-6);
            assert!(s.probs.iter().filter(|&&p| p > 0.0).count() <= 2);
        }
    }

    #[test]
    fn exhausted_returns_greedy() {
        let s = minimize_cir(&[0.4, 0.2, 0.9], &[0.0, 1e-14, 0.0], &IRConfig::default()).unwrap();
        assert!(s.exhausted);
        assert_eq!(s.probs, vec![0.0, 1.0, 0.0]);
        assert_eq!(s.ratio, f64::INFINITY);
    }

    #[test]
    fn budget_mix_uses_alpha() {
        let cfg = IRConfig::new(0.5, 2);
        let s = minimize_cir(&[0.0, 1.0], &[0.1, 1.0], &cfg).unwrap();
        assert_eq!(s.ratio, 0.0);
        assert!((s.probs[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let cfg = IRConfig::default();
        assert!(minimize_cir(&[0.0], &[0.0, 1.0], &cfg).is_err());
        assert!(minimize_cir(&[f64::NAN], &[1.0], &cfg).is_err());
        assert!(minimize_cir(&[], &[], &cfg).is_err());
    }
}
