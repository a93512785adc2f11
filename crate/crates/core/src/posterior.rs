//! Finite-support Bayesian state.
//!
//! The unknown parameter takes one of finitely many values (atoms). The prior
//! and every posterior are probability vectors over those atoms, so Bayes'
//! rule is an exact reweighting. Everything here is an immutable value; the
//! update returns a fresh [`Posterior`].

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{Error, Result};

/// Tolerance for "sums to one" checks on probability vectors.
pub const PROB_TOL: f64 = 1e-9;

/// Weights below this are clamped to zero before renormalising.
pub const UNDERFLOW_CLAMP: f64 = 1e-300;

/// Noiseless observations must match an atom's prediction within this.
pub const EXACT_MATCH_TOL: f64 = 1e-9;

pub(crate) fn check_probability_vector(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::invalid(format!("{what}: empty probability vector")));
    }
    if p.iter().any(|&x| !x.is_finite() || x < 0.0) {
        return Err(Error::invalid(format!(
            "{what}: entries must be finite and nonnegative"
        )));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > PROB_TOL {
        return Err(Error::invalid(format!("{what}: sums to {s}, not 1")));
    }
    Ok(())
}

/// Shannon entropy in nats; zero entries contribute nothing.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.ln())
        .sum::<f64>()
        .max(0.0)
}

/// Finite set of candidate parameter vectors with prior weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSupport {
    params: Vec<Vec<f64>>,
    prior_weights: Vec<f64>,
}

impl ParamSupport {
    pub fn new(params: Vec<Vec<f64>>, prior_weights: Vec<f64>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::invalid("support needs at least one atom"));
        }
        if params.len() != prior_weights.len() {
            return Err(Error::invalid(format!(
                "{} atoms but {} prior weights",
                params.len(),
                prior_weights.len()
            )));
        }
        let dim = params[0].len();
        if params.iter().any(|p| p.len() != dim) {
            return Err(Error::invalid("all atoms must share one dimension"));
        }
        if params.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::invalid("atoms must have finite coordinates"));
        }
        check_probability_vector(&prior_weights, "prior")?;
        Ok(Self {
            params,
            prior_weights,
        })
    }

    pub fn uniform(params: Vec<Vec<f64>>) -> Result<Self> {
        let n = params.len().max(1);
        Self::new(params, vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.params[0].len()
    }

    pub fn param(&self, i: usize) -> &[f64] {
        &self.params[i]
    }

    pub fn params(&self) -> &[Vec<f64>] {
        &self.params
    }

    pub fn prior_weights(&self) -> &[f64] {
        &self.prior_weights
    }
}

/// Posterior measure over the atoms of a shared [`ParamSupport`].
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    support: Arc<ParamSupport>,
    weights: Vec<f64>,
}

impl Posterior {
    pub fn prior(support: Arc<ParamSupport>) -> Self {
        let weights = support.prior_weights().to_vec();
        Self { support, weights }
    }

    pub fn with_weights(support: Arc<ParamSupport>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != support.len() {
            return Err(Error::invalid(format!(
                "posterior has {} weights for {} atoms",
                weights.len(),
                support.len()
            )));
        }
        check_probability_vector(&weights, "posterior")?;
        Ok(Self { support, weights })
    }

    /// Point mass on atom `i`.
    pub fn point_mass(support: Arc<ParamSupport>, i: usize) -> Result<Self> {
        if i >= support.len() {
            return Err(Error::invalid(format!("atom {i} out of range")));
        }
        let mut weights = vec![0.0; support.len()];
        weights[i] = 1.0;
        Ok(Self { support, weights })
    }

    pub fn support(&self) -> &Arc<ParamSupport> {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Entropy of the atom index.
    pub fn entropy(&self) -> f64 {
        entropy(&self.weights)
    }

    /// Draw an atom index.
    pub fn sample_atom<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.weights, rng)
    }
}

/// Inverse-CDF draw from a probability vector; falls back to the last
/// positive entry when rounding leaves the cumulative sum short of `u`.
pub fn sample_index<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &x) in p.iter().enumerate() {
        if x > 0.0 {
            acc += x;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Arrival law of the contexts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextDistribution {
    probs: Vec<f64>,
}

impl ContextDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_probability_vector(&probs, "context distribution")?;
        Ok(Self { probs })
    }

    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("need at least one context"));
        }
        Self::new(vec![1.0 / m as f64; m])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.probs, rng)
    }
}

/// What the agent sees after acting: the revealed `(action, reward)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub chosen_action: usize,
    pub revealed: Vec<(usize, f64)>,
}

/// Per-context distributions over that context's actions.
///
/// Row `m` is indexed by position within `A^m`, not by global action id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    rows: Vec<Vec<f64>>,
}

impl Policy {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("policy needs at least one row"));
        }
        for (m, row) in rows.iter().enumerate() {
            check_probability_vector(row, &format!("policy row {m}"))?;
        }
        Ok(Self { rows })
    }

    /// Build without validation; callers guarantee simplex rows.
    pub(crate) fn from_rows_unchecked(rows: Vec<Vec<f64>>) -> Self {
        Self { rows }
    }

    pub fn uniform(sizes: &[usize]) -> Self {
        Self {
            rows: sizes.iter().map(|&k| vec![1.0 / k as f64; k]).collect(),
        }
    }

    /// Deterministic policy playing local action `choice[m]` in context `m`.
    pub fn deterministic(sizes: &[usize], choice: &[usize]) -> Self {
        Self {
            rows: sizes
                .iter()
                .zip(choice)
                .map(|(&k, &c)| {
                    let mut r = vec![0.0; k];
                    r[c] = 1.0;
                    r
                })
                .collect(),
        }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.rows[m]
    }

    pub fn num_contexts(&self) -> usize {
        self.rows.len()
    }

    /// Check row sizes against an environment's action sets.
    pub fn check_shape(&self, env: &Environment) -> Result<()> {
        if self.rows.len() != env.num_contexts() {
            return Err(Error::invalid("policy has the wrong number of rows"));
        }
        for m in 0..env.num_contexts() {
            if self.rows[m].len() != env.actions(m).len() {
                return Err(Error::invalid(format!(
                    "policy row {m} has the wrong length"
                )));
            }
        }
        Ok(())
    }
}

/// Reward noise law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    Gaussian {
        std: f64,
    },
    /// Rewards are revealed exactly; updates filter atoms by exact match.
    Noiseless,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::Gaussian { std: 1.0 }
    }
}

impl NoiseModel {
    pub fn gaussian(std: f64) -> Result<Self> {
        if !(std > 0.0 && std.is_finite()) {
            return Err(Error::invalid("noise std must be positive and finite"));
        }
        Ok(NoiseModel::Gaussian { std })
    }

    pub fn std(&self) -> f64 {
        match *self {
            NoiseModel::Gaussian { std } => std,
            NoiseModel::Noiseless => 0.0,
        }
    }
}

/// Exact Bayes update after observing `obs` in `context`.
///
/// The likelihood is accumulated in log space; weights that underflow below
/// [`UNDERFLOW_CLAMP`] are dropped before renormalising.
pub fn posterior_update(
    post: &Posterior,
    context: usize,
    obs: &Observation,
    env: &Environment,
) -> Result<Posterior> {
    env.check_context(context)?;
    if !env.actions(context).contains(&obs.chosen_action) {
        return Err(Error::BadAction {
            action: obs.chosen_action,
            reason: format!("not in the action set of context {context}"),
        });
    }
    for &(a, y) in &obs.revealed {
        if a >= env.num_actions() {
            return Err(Error::BadAction {
                action: a,
                reason: "revealed action id out of range".into(),
            });
        }
        if !y.is_finite() {
            return Err(Error::NonFinite(a));
        }
    }
    if post.len() != env.support().len() {
        return Err(Error::invalid(
            "posterior does not match the environment support",
        ));
    }

    let n = post.len();
    let mut logw = vec![f64::NEG_INFINITY; n];
    match env.noise() {
        NoiseModel::Gaussian { std } => {
            let inv = 1.0 / (2.0 * std * std);
            for i in 0..n {
                let w = post.weights[i];
                if w <= 0.0 {
                    continue;
                }
                let mut l = w.ln();
                for &(a, y) in &obs.revealed {
                    let r = y - env.mean(i, a);
                    l -= r * r * inv;
                }
                logw[i] = l;
            }
        }
        NoiseModel::Noiseless => {
            for i in 0..n {
                let w = post.weights[i];
                if w <= 0.0 {
                    continue;
                }
                let ok = obs
                    .revealed
                    .iter()
                    .all(|&(a, y)| (y - env.mean(i, a)).abs() <= EXACT_MATCH_TOL);
                if ok {
                    logw[i] = w.ln();
                }
            }
        }
    }

    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::ZeroLikelihood);
    }
    let mut weights: Vec<f64> = logw
        .iter()
        .map(|&l| {
            let w = (l - max).exp();
            if w < UNDERFLOW_CLAMP {
                0.0
            } else {
                w
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroLikelihood);
    }
    for w in &mut weights {
        *w /= total;
    }
    Ok(Posterior {
        support: Arc::clone(&post.support),
        weights,
    })
}

/// `P_t(a* = a | context)` over the context's actions (local indexing).
pub fn optimal_action_probs(
    post: &Posterior,
    context: usize,
    env: &Environment,
) -> Result<Vec<f64>> {
    env.check_context(context)?;
    let mut p = vec![0.0; env.actions(context).len()];
    for (i, &w) in post.weights.iter().enumerate() {
        if w > 0.0 {
            p[env.optimal_local(i, context)] += w;
        }
    }
    Ok(p)
}

/// Posterior over deterministic optimal policies.
///
/// Atoms are grouped by the map `m -> argmax_a f(m, a, theta)` (local action
/// indices); groups with zero posterior weight are omitted. Groups are listed
/// in order of their lowest atom index.
pub fn optimal_policy_posterior(post: &Posterior, env: &Environment) -> Vec<(Vec<usize>, f64)> {
    let mut mass = vec![0.0; env.num_policy_groups()];
    let mut first_atom = vec![usize::MAX; env.num_policy_groups()];
    for i in 0..post.len() {
        let g = env.policy_group(i);
        mass[g] += post.weights[i];
        if first_atom[g] == usize::MAX {
            first_atom[g] = i;
        }
    }
    let mut out: Vec<(usize, Vec<usize>, f64)> = mass
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(g, &w)| {
            let i = first_atom[g];
            let map = (0..env.num_contexts())
                .map(|m| env.optimal_local(i, m))
                .collect();
            (i, map, w)
        })
        .collect();
    out.sort_by_key(|(i, _, _)| *i);
    out.into_iter().map(|(_, map, w)| (map, w)).collect()
}

/// Posterior-expected one-step regret of each action in `context`.
pub fn regret_vector(post: &Posterior, context: usize, env: &Environment) -> Result<Vec<f64>> {
    env.check_context(context)?;
    let actions = env.actions(context);
    let mut delta = vec![0.0; actions.len()];
    for (i, &w) in post.weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        let best = env.mean(i, actions[env.optimal_local(i, context)]);
        for (j, &a) in actions.iter().enumerate() {
            delta[j] += w * (best - env.mean(i, a));
        }
    }
    for d in &mut delta {
        if *d < 0.0 {
            *d = 0.0;
        }
    }
    Ok(delta)
}

/// Largest absolute mean reward over atoms, contexts and actions.
pub fn r_max(env: &Environment) -> f64 {
    let mut r: f64 = 0.0;
    for i in 0..env.support().len() {
        for m in 0..env.num_contexts() {
            for &a in env.actions(m) {
                r = r.max(env.mean(i, a).abs());
            }
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Bandit feedback; the mean of action `a` is `theta[a]`.
    fn bandit(params: Vec<Vec<f64>>, contexts: Vec<Vec<usize>>, noise: NoiseModel) -> Environment {
        let k = params[0].len();
        let m = contexts.len();
        Environment::new(
            k,
            contexts,
            ContextDistribution::uniform(m).unwrap(),
            Arc::new(ParamSupport::uniform(params).unwrap()),
            noise,
            (0..k).map(|a| vec![a]).collect(),
            |th, a| th[a],
        )
        .unwrap()
    }

    fn density(y: f64, mu: f64, std: f64) -> f64 {
        (-(y - mu).powi(2) / (2.0 * std * std)).exp() / std
    }

    #[test]
    fn bayes_rule_matches_density_product() {
        let params = vec![vec![0.0, 0.2], vec![0.0, 1.0], vec![0.0, -0.7]];
        let env = bandit(
            params.clone(),
            vec![vec![0, 1]],
            NoiseModel::gaussian(0.7).unwrap(),
        );
        let prior =
            Posterior::with_weights(Arc::clone(env.support()), vec![0.2, 0.5, 0.3]).unwrap();
        let y = 0.4;
        let obs = Observation {
            chosen_action: 1,
            revealed: vec![(1, y)],
        };
        let post = posterior_update(&prior, 0, &obs, &env).unwrap();
        let raw: Vec<f64> = params
            .iter()
            .zip(prior.weights())
            .map(|(p, w)| w * density(y, p[1], 0.7))
            .collect();
        let z: f64 = raw.iter().sum();
        for (a, b) in post.weights().iter().zip(&raw) {
            assert!((a - b / z).abs() < 1e-12);
        }
        assert_eq!(prior.weights(), &[0.2, 0.5, 0.3]);
    }

    #[test]
    fn flat_likelihood_leaves_weights_alone() {
        let env = bandit(
            vec![vec![0.5, 0.0], vec![0.5, 1.0]],
            vec![vec![0, 1]],
            NoiseModel::default(),
        );
        let prior = Posterior::prior(Arc::clone(env.support()));
        let obs = Observation {
            chosen_action: 0,
            revealed: vec![(0, 2.3)],
        };
        let post = posterior_update(&prior, 0, &obs, &env).unwrap();
        assert!((post.weights()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn noiseless_update_filters_exactly() {
        let env = bandit(
            vec![vec![0.0, 1.0], vec![0.0, 2.0], vec![0.0, 3.0]],
            vec![vec![0, 1]],
            NoiseModel::Noiseless,
        );
        let prior = Posterior::prior(Arc::clone(env.support()));
        let obs = Observation {
            chosen_action: 1,
            revealed: vec![(1, 2.0)],
        };
        let post = posterior_update(&prior, 0, &obs, &env).unwrap();
        assert_eq!(post.weights(), &[0.0, 1.0, 0.0]);
        let miss = Observation {
            chosen_action: 1,
            revealed: vec![(1, 2.5)],
        };
        assert!(matches!(
            posterior_update(&prior, 0, &miss, &env),
            Err(Error::ZeroLikelihood)
        ));
    }

    #[test]
    fn rejects_bad_observations() {
        let env = bandit(
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![vec![0], vec![1]],
            NoiseModel::default(),
        );
        let prior = Posterior::prior(Arc::clone(env.support()));
        let nan = Observation {
            chosen_action: 0,
            revealed: vec![(0, f64::NAN)],
        };
        assert!(posterior_update(&prior, 0, &nan, &env).is_err());
        let wrong_context = Observation {
            chosen_action: 1,
            revealed: vec![(1, 0.0)],
        };
        assert!(posterior_update(&prior, 0, &wrong_context, &env).is_err());
        let out_of_range = Observation {
            chosen_action: 0,
            revealed: vec![(7, 0.0)],
        };
        assert!(posterior_update(&prior, 0, &out_of_range, &env).is_err());
    }

    #[test]
    fn sequential_updates_equal_one_batch() {
        let env = bandit(
            vec![
                vec![0.1, 0.9, 0.3],
                vec![0.8, 0.2, 0.5],
                vec![0.4, 0.4, 0.0],
            ],
            vec![vec![0, 1, 2]],
            NoiseModel::gaussian(0.5).unwrap(),
        );
        let prior = Posterior::prior(Arc::clone(env.support()));
        let obs = [(0, 0.3), (2, -0.1), (1, 1.2), (0, 0.5)];
        let mut seq = prior.clone();
        for &(a, y) in &obs {
            let o = Observation {
                chosen_action: a,
                revealed: vec![(a, y)],
            };
            seq = posterior_update(&seq, 0, &o, &env).unwrap();
        }
        let batch = Observation {
            chosen_action: 0,
            revealed: obs.to_vec(),
        };
        let once = posterior_update(&prior, 0, &batch, &env).unwrap();
        for (a, b) in seq.weights().iter().zip(once.weights()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn posterior_is_a_martingale() {
        let env = bandit(
            vec![vec![0.0, 0.3], vec![0.0, 1.1], vec![0.0, -0.4]],
            vec![vec![0, 1]],
            NoiseModel::default(),
        );
        let prior =
            Posterior::with_weights(Arc::clone(env.support()), vec![0.5, 0.3, 0.2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 20_000;
        let mut sum = [0.0; 3];
        let mut sq = [0.0; 3];
        for _ in 0..n {
            let i = prior.sample_atom(&mut rng);
            let z: f64 = StandardNormal.sample(&mut rng);
            let o = env.observe(i, 1, &[0.0, z]);
            let p = posterior_update(&prior, 0, &o, &env).unwrap();
            for j in 0..3 {
                sum[j] += p.weights()[j];
                sq[j] += p.weights()[j] * p.weights()[j];
            }
        }
        for j in 0..3 {
            let mean = sum[j] / n as f64;
            let se = ((sq[j] / n as f64 - mean * mean) / n as f64).sqrt();
            assert!(
                (mean - prior.weights()[j]).abs() < 3.0 * se,
                "atom {j}: {mean}"
            );
        }
    }

    #[test]
    fn optimal_action_probs_is_a_marginal_of_the_policy_posterior() {
        let env = bandit(
            vec![
                vec![1.0, 0.0, 0.0, 1.0],
                vec![0.0, 1.0, 0.0, 1.0],
                vec![1.0, 0.0, 1.0, 0.0],
                vec![1.0, 0.5, 0.0, 2.0],
            ],
            vec![vec![0, 1], vec![2, 3]],
            NoiseModel::default(),
        );
        let post =
            Posterior::with_weights(Arc::clone(env.support()), vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let groups = optimal_policy_posterior(&post, &env);
        // Atoms 0 and 3 share the map (0, 1).
        assert_eq!(groups.len(), 3);
        for m in 0..2 {
            let p = optimal_action_probs(&post, m, &env).unwrap();
            let mut q = vec![0.0; 2];
            for (map, w) in &groups {
                q[map[m]] += w;
            }
            for (x, y) in p.iter().zip(&q) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ties_go_to_the_lowest_index() {
        let env = bandit(
            vec![vec![1.0, 1.0, 0.0]],
            vec![vec![2, 1, 0]],
            NoiseModel::default(),
        );
        let post = Posterior::prior(Arc::clone(env.support()));
        assert_eq!(
            optimal_action_probs(&post, 0, &env).unwrap(),
            vec![0.0, 1.0, 0.0]
        );
    }

    #[test]
    fn regret_vector_brute_force() {
        // Linear model over {+e1, -e1} with actions e1, -e1 and 0.
        let params = vec![vec![1.0, -1.0, 0.0], vec![-1.0, 1.0, 0.0]];
        let env = bandit(params.clone(), vec![vec![0, 1, 2]], NoiseModel::default());
        let post = Posterior::prior(Arc::clone(env.support()));
        let d = regret_vector(&post, 0, &env).unwrap();
        let oracle: Vec<f64> = (0..3)
            .map(|a| {
                params
                    .iter()
                    .map(|p| 0.5 * (p.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - p[a]))
                    .sum()
            })
            .collect();
        assert_eq!(d, oracle);
        assert_eq!(d, vec![1.0, 1.0, 1.0]);

        let point = Posterior::point_mass(Arc::clone(env.support()), 0).unwrap();
        let d = regret_vector(&point, 0, &env).unwrap();
        assert_eq!(d, vec![0.0, 2.0, 1.0]);
        assert_eq!(r_max(&env), 1.0);
    }

    #[test]
    fn validation() {
        assert!(ParamSupport::new(vec![], vec![]).is_err());
        assert!(ParamSupport::new(vec![vec![1.0], vec![1.0, 2.0]], vec![0.5, 0.5]).is_err());
        assert!(ParamSupport::new(vec![vec![1.0], vec![2.0]], vec![0.7, 0.7]).is_err());
        assert!(ContextDistribution::new(vec![0.5, -0.1, 0.6]).is_err());
        assert!(Policy::new(vec![vec![0.5, 0.6]]).is_err());
        assert!(NoiseModel::gaussian(0.0).is_err());
        assert!((entropy(&[0.5, 0.5]) - std::f64::consts::LN_2).abs() < 1e-15);
    }
}
