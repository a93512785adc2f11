use std::io::Write;
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::ids::{decide, AgentKind, IRConfig};
use crate::infogain::{
    marg_info_gain_for, param_info_gain, policy_entropy, GainTarget, InfoGainConfig,
};
use crate::posterior::{posterior_update, regret_vector, sample_index, Posterior};

/// Labels of the independent random streams derived from one seed.
pub mod stream {
    pub const CONTEXT: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const AGENT: u64 = 3;
    pub const ESTIMATOR: u64 = 4;
    pub const THETA: u64 = 5;
}

pub fn stream_rng(seed: u64, label: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(label);
    r
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: usize,
    pub context: usize,
    pub action: usize,
    /// Noisy reward of the chosen action, observed or not.
    pub reward: f64,
    /// Posterior-expected regret of the chosen action.
    pub instant_regret: f64,
    /// Regret against the true parameter.
    pub true_regret: f64,
    pub info_gain: f64,
    pub info_ratio: f64,
    /// The agent's action distribution for this context (local order).
    pub row: Vec<f64>,
    pub exhausted: bool,
    /// Entropy of the optimal policy under the posterior before the round.
    pub policy_entropy: f64,
    pub revealed: Vec<(usize, f64)>,
}

/// One agent's run on one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub agent: String,
    pub seed: u64,
    pub true_atom: usize,
    pub rounds: Vec<RoundRecord>,
}

impl Trajectory {
    pub fn cum_regret(&self) -> Vec<f64> {
        running_sum(self.rounds.iter().map(|r| r.instant_regret))
    }

    pub fn cum_info_gain(&self) -> Vec<f64> {
        running_sum(self.rounds.iter().map(|r| r.info_gain))
    }

    pub fn total_regret(&self) -> f64 {
        self.cum_regret().last().copied().unwrap_or(0.0)
    }

    /// Rounds with the given context in which `action` was played.
    pub fn count_action(&self, context: usize, action: usize) -> usize {
        self.rounds
            .iter()
            .filter(|r| r.context == context && r.action == action)
            .count()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let cr = self.cum_regret();
        let cg = self.cum_info_gain();
        for (i, r) in self.rounds.iter().enumerate() {
            out.serialize(CsvRow {
                t: r.t,
                seed: self.seed,
                agent: &self.agent,
                context: r.context,
                action: r.action,
                reward: r.reward,
                instant_regret: r.instant_regret,
                cum_regret: cr[i],
                info_gain: r.info_gain,
                cum_info_gain: cg[i],
                info_ratio: r.info_ratio,
            })?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(f)
    }

    /// Reads the CSV columns back; fields not stored in the file are left
    /// empty or zero.
    pub fn load(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != CSV_COLUMNS {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: 1,
                msg: format!("expected columns {}", CSV_COLUMNS.join(",")),
            });
        }
        let mut agent = String::new();
        let mut seed = 0;
        let mut rounds = Vec::new();
        for (i, row) in rdr.deserialize::<CsvOwned>().enumerate() {
            let r = row.map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: i + 2,
                msg: e.to_string(),
            })?;
            agent = r.agent;
            seed = r.seed;
            rounds.push(RoundRecord {
                t: r.t,
                context: r.context,
                action: r.action,
                reward: r.reward,
                instant_regret: r.instant_regret,
                true_regret: f64::NAN,
                info_gain: r.info_gain,
                info_ratio: r.info_ratio,
                row: Vec::new(),
                exhausted: false,
                policy_entropy: f64::NAN,
                revealed: Vec::new(),
            });
        }
        Ok(Self {
            agent,
            seed,
            true_atom: usize::MAX,
            rounds,
        })
    }
}

pub const CSV_COLUMNS: [&str; 11] = [
    "t",
    "seed",
    "agent",
    "context",
    "action",
    "reward",
    "instant_regret",
    "cum_regret",
    "info_gain",
    "cum_info_gain",
    "info_ratio",
];

#[derive(Serialize)]
struct CsvRow<'a> {
    t: usize,
    seed: u64,
    agent: &'a str,
    context: usize,
    action: usize,
    reward: f64,
    instant_regret: f64,
    cum_regret: f64,
    info_gain: f64,
    cum_info_gain: f64,
    info_ratio: f64,
}

#[derive(Deserialize)]
struct CsvOwned {
    t: usize,
    seed: u64,
    agent: String,
    context: usize,
    action: usize,
    reward: f64,
    instant_regret: f64,
    #[allow(dead_code)]
    cum_regret: f64,
    info_gain: f64,
    #[allow(dead_code)]
    cum_info_gain: f64,
    info_ratio: f64,
}

fn running_sum(it: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    it.map(|x| {
        acc += x;
        acc
    })
    .collect()
}

/// Information about the learning target from playing `a`: about the
/// optimal policy, or about the parameter when that is the configured
/// target.
pub fn logged_gain(
    post: &Posterior,
    env: &Environment,
    a: usize,
    cfg: &InfoGainConfig,
) -> Result<f64> {
    match cfg.target {
        GainTarget::Parameter => Ok(param_info_gain(post, env, cfg)?.values[a]),
        _ => Ok(marg_info_gain_for(post, env, &[a], cfg)?.values[0]),
    }
}

/// What an episode needs to know about the agent.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeAgent {
    pub label: String,
    pub kind: AgentKind,
    pub ir: IRConfig,
}

/// Runs `n` rounds. The true parameter, contexts, reward noise, agent
/// randomization and estimator draws each come from their own stream of
/// `seed`, so two agents with the same seed face the same environment.
pub fn run_episode(
    env: &Environment,
    agent: &EpisodeAgent,
    n: usize,
    seed: u64,
    gain_cfg: &InfoGainConfig,
) -> Result<Trajectory> {
    run_episode_from(
        env,
        agent,
        n,
        seed,
        gain_cfg,
        Posterior::prior(env.support().clone()),
    )
}

/// Like [`run_episode`] but starting from a given belief. The true atom is
/// drawn from that belief.
pub fn run_episode_from(
    env: &Environment,
    agent: &EpisodeAgent,
    n: usize,
    seed: u64,
    gain_cfg: &InfoGainConfig,
    start: Posterior,
) -> Result<Trajectory> {
    agent.kind.validate()?;
    agent.ir.validate()?;
    gain_cfg.validate()?;
    let mut ctx_rng = stream_rng(seed, stream::CONTEXT);
    let mut noise_rng = stream_rng(seed, stream::NOISE);
    let mut agent_rng = stream_rng(seed, stream::AGENT);
    let mut est_rng = stream_rng(seed, stream::ESTIMATOR);
    let mut theta_rng = stream_rng(seed, stream::THETA);
    let gcfg = InfoGainConfig {
        mc_seed: est_rng.next_u64(),
        ..gain_cfg.clone()
    };
    let true_atom = sample_index(start.weights(), &mut theta_rng);
    let k = env.num_actions();
    let mut post = start;
    let mut rounds = Vec::with_capacity(n);
    let mut noise = vec![0.0; k];
    for t in 1..=n {
        let m = env.xi().sample(&mut ctx_rng);
        for z in noise.iter_mut() {
            *z = noise_rng.sample(StandardNormal);
        }
        let round = (|| -> Result<(RoundRecord, Posterior)> {
            let entropy = policy_entropy(&post, env);
            let d = decide(&agent.kind, &post, env, m, &agent.ir, &gcfg, &mut agent_rng)?;
            let local = env
                .local_index(m, d.action)
                .ok_or_else(|| Error::invalid("agent chose an action outside the context"))?;
            let delta = regret_vector(&post, m, env)?;
            let best = env.optimal_action(true_atom, m);
            let true_regret = env.mean(true_atom, best) - env.mean(true_atom, d.action);
            let gain = match (&d.marginal_gains, gcfg.target) {
                (Some(g), _) => g[d.action],
                _ => logged_gain(&post, env, d.action, &gcfg)?,
            };
            let obs = env.observe(true_atom, d.action, &noise);
            let reward = env.mean(true_atom, d.action) + env.noise().std() * noise[d.action];
            let next = posterior_update(&post, m, &obs, env)?;
            Ok((
                RoundRecord {
                    t,
                    context: m,
                    action: d.action,
                    reward,
                    instant_regret: delta[local],
                    true_regret,
                    info_gain: gain,
                    info_ratio: d.ratio,
                    row: d.row,
                    exhausted: d.exhausted,
                    policy_entropy: entropy,
                    revealed: obs.revealed,
                },
                next,
            ))
        })()
        .map_err(|e| e.at_round(t))?;
        rounds.push(round.0);
        post = round.1;
    }
    Ok(Trajectory {
        agent: agent.label.clone(),
        seed,
        true_atom,
        rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::make_example1;
    use crate::posterior::{ContextDistribution, NoiseModel, ParamSupport};
    use std::sync::Arc;

    fn agent(kind: AgentKind) -> EpisodeAgent {
        EpisodeAgent {
            label: kind.label(),
            kind,
            ir: IRConfig::default(),
        }
    }

    fn tiny_env() -> Environment {
        let sup = Arc::new(ParamSupport::uniform(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap());
        Environment::new(
            2,
            vec![vec![0, 1]],
            ContextDistribution::uniform(1).unwrap(),
            sup,
            NoiseModel::default(),
            vec![vec![0], vec![1]],
            |th, a| th[a],
        )
        .unwrap()
    }

    #[test]
    fn point_mass_prior_has_no_regret() {
        let env = tiny_env();
        let start = Posterior::point_mass(env.support().clone(), 1).unwrap();
        for kind in [
            AgentKind::ConditionalIds,
            AgentKind::ContextualIds,
            AgentKind::Thompson,
        ] {
            let tr = run_episode_from(
                &env,
                &agent(kind),
                1,
                3,
                &InfoGainConfig::default(),
                start.clone(),
            )
            .unwrap();
            assert_eq!(tr.rounds[0].instant_regret, 0.0);
            assert_eq!(tr.rounds[0].action, 1);
        }
    }

    #[test]
    fn deterministic_and_monotone() {
        let env = tiny_env();
        let a = agent(AgentKind::ConditionalIds);
        let x = run_episode(&env, &a, 30, 11, &InfoGainConfig::default()).unwrap();
        let y = run_episode(&env, &a, 30, 11, &InfoGainConfig::default()).unwrap();
        assert_eq!(x, y);
        assert!(x.cum_regret().windows(2).all(|w| w[1] >= w[0]));
        assert!(x.cum_info_gain().windows(2).all(|w| w[1] >= w[0]));
        let mut b1 = Vec::new();
        let mut b2 = Vec::new();
        x.write_csv(&mut b1).unwrap();
        y.write_csv(&mut b2).unwrap();
        assert_eq!(b1, b2);
    }

    #[test]
    fn agents_share_the_environment_draws() {
        let env = tiny_env();
        let x = run_episode(
            &env,
            &agent(AgentKind::Uniform),
            20,
            5,
            &InfoGainConfig::default(),
        )
        .unwrap();
        let y = run_episode(
            &env,
            &agent(AgentKind::Thompson),
            20,
            5,
            &InfoGainConfig::default(),
        )
        .unwrap();
        assert_eq!(x.true_atom, y.true_atom);
        let cx: Vec<usize> = x.rounds.iter().map(|r| r.context).collect();
        let cy: Vec<usize> = y.rounds.iter().map(|r| r.context).collect();
        assert_eq!(cx, cy);
    }

    #[test]
    fn conditional_ids_never_reveals_in_example1() {
        let g = make_example1(6).unwrap();
        let a = agent(AgentKind::ConditionalIds);
        for seed in 0..3 {
            let tr = run_episode(&g.env, &a, 40, seed, &InfoGainConfig::default()).unwrap();
            assert_eq!(tr.count_action(1, 6), 0);
        }
    }

    #[test]
    fn csv_round_trip() {
        let env = tiny_env();
        let tr = run_episode(
            &env,
            &agent(AgentKind::Thompson),
            5,
            2,
            &InfoGainConfig::default(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        tr.save(&p).unwrap();
        let back = Trajectory::load(&p).unwrap();
        assert_eq!(back.rounds.len(), 5);
        assert_eq!(back.agent, "thompson");
        assert_eq!(back.cum_regret(), tr.cum_regret());
    }
}
