//! Numerical checks of the information-ratio and information-gain bounds
//! against logged trajectories, plus small statistics helpers.

use serde::{Deserialize, Serialize};

use super::bounds::BoundMetrics;
use super::episode::Trajectory;
use super::experiment::TrajectoryMeta;
use crate::error::Result;
use crate::ids::{floored, minimize_mir, policy_moments, AgentKind, IRConfig};
use crate::infogain::{Estimator, InfoGainConfig};
use crate::posterior::ContextDistribution;

/// What the audit needs to know beyond the trajectories themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditContext {
    pub metrics: BoundMetrics,
    pub agent_kind: AgentKind,
    pub alpha: f64,
    pub lambda: u32,
    /// Entropy of the optimal policy under the prior.
    pub prior_policy_entropy: f64,
    /// Per-round estimator tolerance; cumulative checks allow 5x this per
    /// round.
    pub gain_tolerance: f64,
}

impl AuditContext {
    pub fn from_meta(meta: &TrajectoryMeta) -> Self {
        Self {
            metrics: meta.metrics.clone(),
            agent_kind: meta.agent_kind.clone(),
            alpha: meta.alpha,
            lambda: meta.lambda,
            prior_policy_entropy: meta.prior_policy_entropy,
            gain_tolerance: estimator_tolerance(&meta.config.estimator),
        }
    }
}

/// Typical per-entry error of a gain estimate: quadrature is treated as
/// exact up to 1e-6 nats, Monte Carlo as `1/sqrt(samples)`.
pub fn estimator_tolerance(cfg: &InfoGainConfig) -> f64 {
    match cfg.estimator {
        Estimator::Quadrature => 1e-6,
        Estimator::MonteCarlo => 1.0 / (cfg.mc_samples as f64).sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub agent: String,
    /// `None` for checks on the mean over seeds.
    pub seed: Option<u64>,
    pub t: usize,
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub applicable: bool,
    /// Why the check was skipped, when it was.
    pub note: String,
    pub evaluated: usize,
    pub bound: f64,
    /// Smallest `bound - value` seen.
    pub min_margin: f64,
    pub violations: Vec<Violation>,
}

impl CheckResult {
    fn skipped(name: &str, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            applicable: false,
            note: note.into(),
            evaluated: 0,
            bound: f64::NAN,
            min_margin: f64::INFINITY,
            violations: Vec::new(),
        }
    }

    fn new(name: &str, bound: f64) -> Self {
        Self {
            name: name.into(),
            applicable: true,
            note: String::new(),
            evaluated: 0,
            bound,
            min_margin: f64::INFINITY,
            violations: Vec::new(),
        }
    }

    fn record(&mut self, agent: &str, seed: Option<u64>, t: usize, value: f64, bound: f64) {
        self.evaluated += 1;
        let margin = bound - value;
        if margin.is_nan() || margin < self.min_margin {
            self.min_margin = margin;
        }
        if !(value <= bound) {
            self.violations.push(Violation {
                agent: agent.into(),
                seed,
                t,
                value,
                bound,
            });
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub checks: Vec<CheckResult>,
}

impl AuditReport {
    pub fn total_violations(&self) -> usize {
        self.checks.iter().map(|c| c.violations.len()).sum()
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const SQUARED_RATIO_GRAPH: &str = "squared_ratio_graph";
pub const CUBIC_RATIO_GRAPH: &str = "cubic_ratio_graph";
pub const CUMULATIVE_GAIN_ENTROPY: &str = "cumulative_gain_entropy";
pub const SQUARED_RATIO_SPARSE: &str = "squared_ratio_sparse";
pub const CUMULATIVE_GAIN_SPARSE: &str = "cumulative_gain_sparse";

/// `4 (R^2 + 1) / (1 - eps) beta log(4 k^2 / (beta eps))`.
pub fn squared_graph_bound(r_max: f64, beta: f64, k: f64, eps: f64) -> f64 {
    4.0 * (r_max * r_max + 1.0) / (1.0 - eps) * beta * (4.0 * k * k / (beta * eps)).ln()
}

pub fn cubic_graph_bound(r_max: f64, vartheta: f64) -> f64 {
    (r_max.powi(3) + r_max) / vartheta
}

pub fn sparse_gain_bound(d: f64, s: f64, n: f64) -> f64 {
    2.0 * s * (d * n.sqrt() / s).ln()
}

fn is_contextual(k: &AgentKind) -> bool {
    matches!(k, AgentKind::ContextualIds)
}

/// Mean cumulative gain per round and its standard error across
/// trajectories.
fn mean_cum_gain(trajs: &[&Trajectory]) -> Vec<(f64, f64)> {
    let curves: Vec<Vec<f64>> = trajs.iter().map(|t| t.cum_info_gain()).collect();
    let n = curves.iter().map(Vec::len).max().unwrap_or(0);
    (0..n)
        .map(|i| {
            let xs: Vec<f64> = curves.iter().filter_map(|c| c.get(i).copied()).collect();
            let k = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / k;
            let var = if xs.len() > 1 {
                xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0)
            } else {
                0.0
            };
            (mean, (var / k).sqrt())
        })
        .collect()
}

/// Runs every applicable check. Ratio bounds are checked round by round on
/// each trajectory. Cumulative-gain bounds hold in expectation only, so they
/// are checked on the mean over the trajectories given, allowing three
/// standard errors; a single trajectory cannot be checked.
pub fn audit_lemmas(trajs: &[&Trajectory], ctx: &AuditContext) -> AuditReport {
    let m = &ctx.metrics;
    let n = m.horizon.max(1) as f64;
    let eps = 1.0 / n.sqrt();
    let contextual = is_contextual(&ctx.agent_kind);
    let mut checks = Vec::new();

    // Once the gain is below the solver floor and the regret is small enough
    // that the ratio would be within bound at the floor, the ratio is 0/0 in
    // floating point and is left out.
    let floor = IRConfig::default().info_floor;
    let ratio_check = |name: &str, bound: f64| {
        let mut c = CheckResult::new(name, bound);
        let mut undefined = 0;
        for tr in trajs {
            for r in &tr.rounds {
                if r.exhausted && r.instant_regret.max(0.0).powi(ctx.lambda as i32) <= bound * floor
                {
                    undefined += 1;
                    continue;
                }
                c.record(&tr.agent, Some(tr.seed), r.t, r.info_ratio, bound);
            }
        }
        if undefined > 0 {
            c.note = format!("{undefined} converged rounds with gain below the floor left out");
        }
        c
    };

    let graph = m.graph_class.as_deref();
    checks.push(match (graph, m.beta) {
        (Some("strongly_observable"), Some(beta)) if contextual && ctx.lambda == 2 => {
            if ctx.alpha + 1e-12 < 2.0 * eps * m.r_max {
                CheckResult::skipped(SQUARED_RATIO_GRAPH, "alpha below 2 eps R_max")
            } else {
                ratio_check(
                    SQUARED_RATIO_GRAPH,
                    squared_graph_bound(m.r_max, beta as f64, m.k as f64, eps),
                )
            }
        }
        (Some("strongly_observable"), None) => {
            CheckResult::skipped(SQUARED_RATIO_GRAPH, "beta unavailable")
        }
        _ => CheckResult::skipped(
            SQUARED_RATIO_GRAPH,
            "needs contextual IDS with lambda 2 on a strongly observable graph",
        ),
    });
    checks.push(match (graph, m.vartheta) {
        (Some("weakly_observable"), Some(v)) if contextual && ctx.lambda == 3 && v > 0.0 => {
            if ctx.alpha > 2.0 * m.r_max {
                CheckResult::skipped(CUBIC_RATIO_GRAPH, "alpha above 2 R_max")
            } else {
                ratio_check(CUBIC_RATIO_GRAPH, cubic_graph_bound(m.r_max, v))
            }
        }
        _ => CheckResult::skipped(
            CUBIC_RATIO_GRAPH,
            "needs contextual IDS with lambda 3 on a weakly observable graph",
        ),
    });

    let entropy_bound = ctx
        .prior_policy_entropy
        .min(m.m as f64 * (m.k.max(1) as f64).ln());
    let mean = mean_cum_gain(trajs);
    let label = trajs.first().map(|t| t.agent.clone()).unwrap_or_default();
    let gain_check = |name: &str, bound: f64| {
        if trajs.len() < 2 {
            return CheckResult::skipped(
                name,
                "holds in expectation; needs at least two trajectories",
            );
        }
        let mut c = CheckResult::new(name, bound);
        for (i, &(g, se)) in mean.iter().enumerate() {
            let slack = 5.0 * ctx.gain_tolerance * (i + 1) as f64 + 3.0 * se;
            c.record(&label, None, i + 1, g, bound + slack);
        }
        c
    };
    checks.push(gain_check(CUMULATIVE_GAIN_ENTROPY, entropy_bound));

    checks.push(match (m.d, m.s) {
        (Some(d), Some(_)) if contextual && ctx.lambda == 2 && ctx.alpha == 0.0 => ratio_check(
            SQUARED_RATIO_SPARSE,
            (m.r_max * m.r_max + 1.0) * d as f64 / 2.0,
        ),
        (Some(_), Some(_)) => CheckResult::skipped(
            SQUARED_RATIO_SPARSE,
            "needs contextual IDS with lambda 2 and alpha 0",
        ),
        _ => CheckResult::skipped(SQUARED_RATIO_SPARSE, "not a sparse instance"),
    });
    checks.push(match (m.d, m.s) {
        (Some(d), Some(s)) => gain_check(
            CUMULATIVE_GAIN_SPARSE,
            sparse_gain_bound(d as f64, s as f64, n),
        ),
        _ => CheckResult::skipped(CUMULATIVE_GAIN_SPARSE, "not a sparse instance"),
    });
    AuditReport { checks }
}

/// Exact two-sided sign test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignTest {
    /// Pairs with `a < b`.
    pub below: usize,
    pub above: usize,
    pub ties: usize,
    pub p_value: f64,
}

pub fn sign_test(a: &[f64], b: &[f64]) -> SignTest {
    let mut below = 0;
    let mut above = 0;
    let mut ties = 0;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            below += 1;
        } else if x > y {
            above += 1;
        } else {
            ties += 1;
        }
    }
    let n = below + above;
    let k = below.min(above);
    // P(X <= k) for X ~ Bin(n, 1/2), in log space.
    let ln_half_n = -(n as f64) * std::f64::consts::LN_2;
    let mut ln_c = 0.0;
    let mut tail = 0.0;
    for i in 0..=k {
        if i > 0 {
            ln_c += ((n - i + 1) as f64).ln() - (i as f64).ln();
        }
        tail += (ln_c + ln_half_n).exp();
    }
    let p_value = if n == 0 { 1.0 } else { (2.0 * tail).min(1.0) };
    SignTest {
        below,
        above,
        ties,
        p_value,
    }
}

/// Both sides of the adaptivity inequality at one belief state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdaptivityRow {
    pub lambda: u32,
    /// `(E[Delta' pi] - alpha)_+` for the lambda = 2 minimizer `pi`.
    pub lhs: f64,
    /// `2^(1 - 2/lambda) E[I' pi]^(1/lambda) Psi_lambda(q_lambda)^(1/lambda)`.
    pub rhs: f64,
}

/// Evaluates the inequality for `lambda` in {2, 3} with `q_lambda` the
/// separately computed lambda-minimizer.
pub fn adaptivity_check(
    deltas: &[Vec<f64>],
    gains: &[Vec<f64>],
    xi: &ContextDistribution,
    base: &IRConfig,
) -> Result<Vec<AdaptivityRow>> {
    let two = IRConfig { lambda: 2, ..*base };
    let pi = minimize_mir(deltas, gains, xi, &two)?;
    let g: Vec<Vec<f64>> = gains.iter().map(|x| floored(x, base.info_floor)).collect();
    let (d, i) = policy_moments(&pi.policy, deltas, &g, xi);
    let lhs = (d - base.alpha).max(0.0);
    let mut out = Vec::new();
    for lambda in [2u32, 3] {
        let cfg = IRConfig { lambda, ..*base };
        let q = minimize_mir(deltas, gains, xi, &cfg)?;
        let l = lambda as f64;
        let rhs = 2f64.powf(1.0 - 2.0 / l) * i.powf(1.0 / l) * q.ratio.powf(1.0 / l);
        out.push(AdaptivityRow { lambda, lhs, rhs });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::episode::RoundRecord;

    #[test]
    fn sign_test_values() {
        // 20 of 20 in one direction: p = 2 / 2^20.
        let a = vec![0.0; 20];
        let b = vec![1.0; 20];
        let s = sign_test(&a, &b);
        assert_eq!(s.below, 20);
        assert!((s.p_value - 2.0 / 1_048_576.0).abs() < 1e-18);
        // 15 vs 5: two-sided p = 0.04138946533203125.
        let mut b2 = vec![1.0; 15];
        b2.extend(vec![-1.0; 5]);
        assert!((sign_test(&a, &b2).p_value - 0.041_389_465_332_031_25).abs() < 1e-12);
        assert_eq!(sign_test(&a, &a).p_value, 1.0);
    }

    fn traj(gains: &[f64], ratios: &[f64]) -> Trajectory {
        Trajectory {
            agent: "x".into(),
            seed: 1,
            true_atom: 0,
            rounds: gains
                .iter()
                .zip(ratios)
                .enumerate()
                .map(|(i, (&g, &r))| RoundRecord {
                    t: i + 1,
                    context: 0,
                    action: 0,
                    reward: 0.0,
                    instant_regret: 0.0,
                    true_regret: 0.0,
                    info_gain: g,
                    info_ratio: r,
                    row: vec![],
                    exhausted: false,
                    policy_entropy: 0.0,
                    revealed: vec![],
                })
                .collect(),
        }
    }

    fn ctx() -> AuditContext {
        AuditContext {
            metrics: BoundMetrics {
                k: 4,
                m: 2,
                r_max: 1.0,
                horizon: 3,
                graph_class: Some("strongly_observable".into()),
                beta: Some(2),
                ..Default::default()
            },
            agent_kind: AgentKind::ContextualIds,
            alpha: 2.0 / 3f64.sqrt(),
            lambda: 2,
            prior_policy_entropy: 1.0,
            gain_tolerance: 0.0,
        }
    }

    #[test]
    fn point_mass_passes() {
        let t = traj(&[0.0; 3], &[0.0; 3]);
        let r = audit_lemmas(&[&t], &ctx());
        assert_eq!(r.total_violations(), 0);
        assert!(r.check(SQUARED_RATIO_GRAPH).unwrap().applicable);
    }

    #[test]
    fn flags_excess_gain() {
        let t = traj(&[0.6, 0.6, 0.0], &[0.0; 3]);
        let r = audit_lemmas(&[&t, &t], &ctx());
        assert_eq!(
            r.check(CUMULATIVE_GAIN_ENTROPY).unwrap().violations.len(),
            2
        );
        let one = audit_lemmas(&[&t], &ctx());
        assert!(!one.check(CUMULATIVE_GAIN_ENTROPY).unwrap().applicable);
    }

    #[test]
    fn converged_rounds_are_left_out_only_at_negligible_regret() {
        let mut t = traj(&[0.0; 2], &[f64::INFINITY; 2]);
        for r in t.rounds.iter_mut() {
            r.exhausted = true;
        }
        t.rounds[0].instant_regret = 1e-9;
        t.rounds[1].instant_regret = 0.1;
        let r = audit_lemmas(&[&t], &ctx());
        let c = r.check(SQUARED_RATIO_GRAPH).unwrap();
        assert_eq!(c.evaluated, 1);
        assert_eq!(c.violations.len(), 1);
        assert_eq!(c.violations[0].t, 2);
    }
}
