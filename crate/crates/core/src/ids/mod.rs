//! Decision layer: information-ratio minimizers and the agents built on them.

mod agent;
mod cir;
mod mir;

pub use agent::{act, decide, AgentKind, Decision};
pub use cir::{minimize_cir, CirSolution};
pub use mir::{
    contextual_inputs, empirical_xi, frank_wolfe_mir, fw_gap, minimize_mir, sampled_mir_policy,
    MirSolution,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posterior::{ContextDistribution, Policy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IRConfig {
    pub alpha: f64,
    pub lambda: u32,
    pub fw_max_iters: usize,
    pub fw_tol: f64,
    pub info_floor: f64,
}

impl Default for IRConfig {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            lambda: 2,
            fw_max_iters: 500,
            fw_tol: 1e-7,
            info_floor: 1e-12,
        }
    }
}

impl IRConfig {
    pub fn new(alpha: f64, lambda: u32) -> Self {
        Self {
            alpha,
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid("alpha must be finite and nonnegative"));
        }
        if self.lambda != 2 && self.lambda != 3 {
            return Err(Error::invalid("lambda must be 2 or 3"));
        }
        if self.fw_max_iters == 0 {
            return Err(Error::invalid("fw_max_iters must be positive"));
        }
        if !(self.fw_tol > 0.0) || !(self.info_floor > 0.0) {
            return Err(Error::invalid("fw_tol and info_floor must be positive"));
        }
        Ok(())
    }
}

/// `max(0, d - alpha)^lambda / i`, with `0` for a zero numerator and
/// `+inf` for a positive numerator over a zero denominator.
pub fn ratio_value(d: f64, i: f64, alpha: f64, lambda: u32) -> f64 {
    let n = (d - alpha).max(0.0);
    if n <= 0.0 {
        return 0.0;
    }
    if i <= 0.0 {
        return f64::INFINITY;
    }
    n.powi(lambda as i32) / i
}

/// Minimizes `(u + p du)^lambda / (v + p dv)` over `p` in `[0, 1]`,
/// assuming `u > 0` and `u + du > 0`. Returns `(p, value)`.
pub(crate) fn segment_min(u: f64, du: f64, v: f64, dv: f64, lambda: u32) -> (f64, f64) {
    let f = |p: f64| {
        let den = v + p * dv;
        let num = (u + p * du).max(0.0).powi(lambda as i32);
        if num <= 0.0 {
            0.0
        } else if den <= 0.0 {
            f64::INFINITY
        } else {
            num / den
        }
    };
    let mut best = (0.0, f(0.0));
    let f1 = f(1.0);
    if f1 < best.1 {
        best = (1.0, f1);
    }
    let denom = (lambda as f64 - 1.0) * du * dv;
    if denom != 0.0 {
        let p = (u * dv - lambda as f64 * du * v) / denom;
        if p > 0.0 && p < 1.0 {
            let fp = f(p);
            if fp < best.1 {
                best = (p, fp);
            }
        }
    }
    best
}

/// Gains below the floor count as exactly zero.
pub fn floored(g: &[f64], floor: f64) -> Vec<f64> {
    g.iter().map(|&x| if x < floor { 0.0 } else { x }).collect()
}

pub(crate) fn argmin_lowest(v: &[f64]) -> usize {
    let mut best = 0;
    for j in 1..v.len() {
        if v[j] < v[best] {
            best = j;
        }
    }
    best
}

/// Expected regret and expected gain of a policy under `xi`.
pub fn policy_moments(
    policy: &Policy,
    deltas: &[Vec<f64>],
    gains: &[Vec<f64>],
    xi: &ContextDistribution,
) -> (f64, f64) {
    let mut d = 0.0;
    let mut i = 0.0;
    for (m, &p) in xi.probs().iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        let row = policy.row(m);
        d += p * row.iter().zip(&deltas[m]).map(|(a, b)| a * b).sum::<f64>();
        i += p * row.iter().zip(&gains[m]).map(|(a, b)| a * b).sum::<f64>();
    }
    (d, i)
}

/// Evaluates the information ratio of a full policy (the conditional ratio
/// when there is one context with probability one).
pub fn realized_ratio(
    policy: &Policy,
    deltas: &[Vec<f64>],
    gains: &[Vec<f64>],
    xi: &ContextDistribution,
    cfg: &IRConfig,
) -> Result<f64> {
    check_shapes(deltas, gains, xi)?;
    if policy.num_contexts() != deltas.len()
        || policy
            .rows()
            .iter()
            .zip(deltas)
            .any(|(r, d)| r.len() != d.len())
    {
        return Err(Error::invalid(
            "policy shape does not match the regret vectors",
        ));
    }
    let g: Vec<Vec<f64>> = gains.iter().map(|x| floored(x, cfg.info_floor)).collect();
    let (d, i) = policy_moments(policy, deltas, &g, xi);
    Ok(ratio_value(d, i, cfg.alpha, cfg.lambda))
}

/// Conditional ratio of a single distribution.
pub fn realized_ratio_row(row: &[f64], delta: &[f64], gain: &[f64], cfg: &IRConfig) -> f64 {
    let g = floored(gain, cfg.info_floor);
    let d: f64 = row.iter().zip(delta).map(|(a, b)| a * b).sum();
    let i: f64 = row.iter().zip(&g).map(|(a, b)| a * b).sum();
    ratio_value(d, i, cfg.alpha, cfg.lambda)
}

pub(crate) fn check_shapes(
    deltas: &[Vec<f64>],
    gains: &[Vec<f64>],
    xi: &ContextDistribution,
) -> Result<()> {
    if deltas.len() != xi.len() || gains.len() != xi.len() {
        return Err(Error::invalid(
            "need one regret and one gain vector per context",
        ));
    }
    for (m, (d, g)) in deltas.iter().zip(gains).enumerate() {
        if d.is_empty() || d.len() != g.len() {
            return Err(Error::invalid(format!(
                "context {m}: regret and gain lengths differ"
            )));
        }
        if d.iter().chain(g).any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::invalid(format!(
                "context {m}: regrets and gains must be finite and nonnegative"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_value_edge_cases() {
        assert_eq!(ratio_value(0.5, 0.0, 1.0, 2), 0.0);
        assert_eq!(ratio_value(1.0, 0.0, 0.0, 2), f64::INFINITY);
        assert!((ratio_value(2.0, 4.0, 0.0, 2) - 1.0).abs() < 1e-15);
        assert!((ratio_value(2.0, 4.0, 1.0, 3) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn segment_min_matches_scan() {
        let (u, du, v, dv) = (0.8, -0.5, 0.1, 0.9);
        for lambda in [2, 3] {
            let (p, val) = segment_min(u, du, v, dv, lambda);
            let mut best = f64::INFINITY;
            for s in 0..=100_000 {
                let q = s as f64 / 100_000.0;
                best = best.min((u + q * du).powi(lambda as i32) / (v + q * dv));
            }
            assert!(val <= best + 1e-12, "lambda={lambda} p={p} {val} vs {best}");
            assert!(val >= best - 1e-6);
        }
    }

    #[test]
    fn config_validation() {
        assert!(IRConfig::default().validate().is_ok());
        assert!(IRConfig::new(0.0, 4).validate().is_err());
        assert!(IRConfig::new(-1.0, 2).validate().is_err());
    }
}
