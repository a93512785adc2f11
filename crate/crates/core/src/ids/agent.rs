use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mir::contextual_inputs;
use super::{minimize_cir, minimize_mir, realized_ratio_row, sampled_mir_policy, IRConfig};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::infogain::{cond_info_gain, param_info_gain, GainTarget, InfoGainConfig};
use crate::posterior::{optimal_action_probs, regret_vector, sample_index, Policy, Posterior};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentKind {
    ConditionalIds,
    ContextualIds,
    SampledContextualIds {
        w: usize,
    },
    Thompson,
    Uniform,
    /// Thompson sampling with probability `1 - epsilon`, otherwise a draw
    /// from `explore` (uniform rows when absent).
    TsMixture {
        epsilon: f64,
        #[serde(default)]
        explore: Option<Policy>,
    },
}

impl AgentKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            AgentKind::SampledContextualIds { w } if *w == 0 => {
                Err(Error::invalid("sampled contextual IDS needs w >= 1"))
            }
            AgentKind::TsMixture { epsilon, .. } if !(0.0..=1.0).contains(epsilon) => {
                Err(Error::invalid("ts_mixture epsilon must lie in [0, 1]"))
            }
            _ => Ok(()),
        }
    }

    /// Short label used in file names and CSV columns.
    pub fn label(&self) -> String {
        match self {
            AgentKind::ConditionalIds => "conditional_ids".into(),
            AgentKind::ContextualIds => "contextual_ids".into(),
            AgentKind::SampledContextualIds { w } => format!("sampled_contextual_ids_w{w}"),
            AgentKind::Thompson => "thompson".into(),
            AgentKind::Uniform => "uniform".into(),
            AgentKind::TsMixture { epsilon, .. } => format!("ts_mixture_eps{epsilon}"),
        }
    }
}

/// Everything an agent computed while choosing its action.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub action: usize,
    /// Distribution over the context's actions (local order).
    pub row: Vec<f64>,
    /// The agent's information ratio at its own distribution.
    pub ratio: f64,
    pub exhausted: bool,
    /// Full policy, for the contextual agents.
    pub policy: Option<Policy>,
    /// Gains per global action, when the agent computed all of them.
    pub marginal_gains: Option<Vec<f64>>,
}

/// Chooses an action and returns the intermediate quantities.
#[allow(clippy::too_many_arguments)]
pub fn decide<R: Rng + ?Sized>(
    agent: &AgentKind,
    post: &Posterior,
    env: &Environment,
    context: usize,
    cfg: &IRConfig,
    gain_cfg: &InfoGainConfig,
    rng: &mut R,
) -> Result<Decision> {
    env.check_context(context)?;
    agent.validate()?;
    let actions = env.actions(context);
    let finish = |row: Vec<f64>, ratio, exhausted, policy, marginal_gains, rng: &mut R| {
        let local = sample_index(&row, rng);
        Decision {
            action: actions[local],
            row,
            ratio,
            exhausted,
            policy,
            marginal_gains,
        }
    };
    let cond_ratio = |row: &[f64]| -> Result<f64> {
        let delta = regret_vector(post, context, env)?;
        let gain = conditional_gains(post, env, context, gain_cfg)?;
        Ok(realized_ratio_row(row, &delta, &gain, cfg))
    };

    match agent {
        AgentKind::ConditionalIds => {
            let delta = regret_vector(post, context, env)?;
            let gain = conditional_gains(post, env, context, gain_cfg)?;
            let s = minimize_cir(&delta, &gain, cfg)?;
            Ok(finish(s.probs, s.ratio, s.exhausted, None, None, rng))
        }
        AgentKind::ContextualIds => {
            let (deltas, gains) = contextual_inputs(post, env, gain_cfg)?;
            let s = minimize_mir(&deltas, &gains, env.xi(), cfg)?;
            let marg = global_gains(env, &gains);
            let row = s.policy.row(context).to_vec();
            Ok(finish(
                row,
                s.ratio,
                s.exhausted,
                Some(s.policy),
                Some(marg),
                rng,
            ))
        }
        AgentKind::SampledContextualIds { w } => {
            let s = sampled_mir_policy(post, env, *w, cfg, gain_cfg, rng)?;
            let row = s.policy.row(context).to_vec();
            Ok(finish(row, s.ratio, s.exhausted, Some(s.policy), None, rng))
        }
        AgentKind::Thompson => {
            let i = post.sample_atom(rng);
            let mut row = vec![0.0; actions.len()];
            row[env.optimal_local(i, context)] = 1.0;
            let ts = optimal_action_probs(post, context, env)?;
            let ratio = cond_ratio(&ts)?;
            Ok(finish(row, ratio, false, None, None, rng))
        }
        AgentKind::Uniform => {
            let row = vec![1.0 / actions.len() as f64; actions.len()];
            let ratio = cond_ratio(&row)?;
            Ok(finish(row, ratio, false, None, None, rng))
        }
        AgentKind::TsMixture { epsilon, explore } => {
            let explore_row = match explore {
                Some(p) => {
                    p.check_shape(env)?;
                    p.row(context).to_vec()
                }
                None => vec![1.0 / actions.len() as f64; actions.len()],
            };
            let ts = optimal_action_probs(post, context, env)?;
            let mix: Vec<f64> = ts
                .iter()
                .zip(&explore_row)
                .map(|(a, b)| (1.0 - epsilon) * a + epsilon * b)
                .collect();
            let ratio = cond_ratio(&mix)?;
            let u: f64 = rng.random();
            let row = if u < *epsilon {
                explore_row
            } else {
                let i = post.sample_atom(rng);
                let mut r = vec![0.0; actions.len()];
                r[env.optimal_local(i, context)] = 1.0;
                r
            };
            let mut d = finish(row, ratio, false, None, None, rng);
            d.row = mix;
            Ok(d)
        }
    }
}

/// Samples an action for `context`.
pub fn act<R: Rng + ?Sized>(
    agent: &AgentKind,
    post: &Posterior,
    env: &Environment,
    context: usize,
    cfg: &IRConfig,
    gain_cfg: &InfoGainConfig,
    rng: &mut R,
) -> Result<usize> {
    decide(agent, post, env, context, cfg, gain_cfg, rng).map(|d| d.action)
}

fn conditional_gains(
    post: &Posterior,
    env: &Environment,
    context: usize,
    gain_cfg: &InfoGainConfig,
) -> Result<Vec<f64>> {
    match gain_cfg.target {
        GainTarget::Parameter => {
            let all = param_info_gain(post, env, gain_cfg)?;
            Ok(env
                .actions(context)
                .iter()
                .map(|&a| all.values[a])
                .collect())
        }
        _ => Ok(cond_info_gain(post, context, env, gain_cfg)?.values),
    }
}

fn global_gains(env: &Environment, per_context: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![f64::NAN; env.num_actions()];
    for (m, g) in per_context.iter().enumerate() {
        for (&a, &v) in env.actions(m).iter().zip(g) {
            out[a] = v;
        }
    }
    out
}
