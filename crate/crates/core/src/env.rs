//! Generic finite-support contextual bandit environment.
//!
//! Actions carry global ids shared by every context that lists them. Playing
//! action `a` reveals the noisy rewards of every action in `reveals(a)`. All
//! per-atom means and per-atom optimal actions are tabulated once at
//! construction so that inference and information computations are lookups.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::posterior::{ContextDistribution, NoiseModel, Observation, ParamSupport};

/// Atoms grouped by the mean vector they induce on one revealed set.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsClasses {
    pub revealed: Vec<usize>,
    /// Class index of every atom.
    pub class_of: Vec<usize>,
    /// Mean vector of each class over `revealed`.
    pub means: Vec<Vec<f64>>,
}

impl ObsClasses {
    pub fn num_classes(&self) -> usize {
        self.means.len()
    }
}

#[derive(Debug, Clone)]
pub struct Environment {
    num_actions: usize,
    contexts: Vec<Vec<usize>>,
    xi: ContextDistribution,
    support: Arc<ParamSupport>,
    noise: NoiseModel,
    reveals: Vec<Vec<usize>>,
    means: Vec<Vec<f64>>,
    optimal: Vec<Vec<usize>>,
    policy_group: Vec<usize>,
    num_groups: usize,
    classes: Vec<ObsClasses>,
    class_set_of: Vec<usize>,
}

fn key_of(v: &[f64]) -> Vec<u64> {
    v.iter().map(|&x| (x + 0.0).to_bits()).collect()
}

impl Environment {
    /// `mean(theta, a)` gives the expected reward of global action `a`.
    pub fn new<F>(
        num_actions: usize,
        contexts: Vec<Vec<usize>>,
        xi: ContextDistribution,
        support: Arc<ParamSupport>,
        noise: NoiseModel,
        reveals: Vec<Vec<usize>>,
        mean: F,
    ) -> Result<Self>
    where
        F: Fn(&[f64], usize) -> f64,
    {
        if num_actions == 0 {
            return Err(Error::invalid("environment needs at least one action"));
        }
        if contexts.is_empty() {
            return Err(Error::invalid("environment needs at least one context"));
        }
        if xi.len() != contexts.len() {
            return Err(Error::invalid(format!(
                "{} contexts but xi has {} entries",
                contexts.len(),
                xi.len()
            )));
        }
        if let NoiseModel::Gaussian { std } = noise {
            if !(std > 0.0 && std.is_finite()) {
                return Err(Error::invalid("noise std must be positive"));
            }
        }
        for (m, ctx) in contexts.iter().enumerate() {
            if ctx.is_empty() {
                return Err(Error::invalid(format!("context {m} has no actions")));
            }
            let mut seen = ctx.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != ctx.len() {
                return Err(Error::invalid(format!("context {m} repeats an action")));
            }
            if let Some(&a) = ctx.iter().find(|&&a| a >= num_actions) {
                return Err(Error::BadAction {
                    action: a,
                    reason: format!("listed in context {m} but out of range"),
                });
            }
        }
        if reveals.len() != num_actions {
            return Err(Error::invalid("need one revealed set per action"));
        }
        let mut reveals = reveals;
        for r in &mut reveals {
            r.sort_unstable();
            r.dedup();
            if let Some(&a) = r.iter().find(|&&a| a >= num_actions) {
                return Err(Error::BadAction {
                    action: a,
                    reason: "revealed set refers to an unknown action".into(),
                });
            }
        }

        let means: Vec<Vec<f64>> = support
            .params()
            .iter()
            .map(|th| (0..num_actions).map(|a| mean(th, a)).collect())
            .collect();
        if means.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::invalid("reward function produced a non-finite mean"));
        }

        let optimal: Vec<Vec<usize>> = means
            .iter()
            .map(|row| {
                contexts
                    .iter()
                    .map(|ctx| {
                        let mut best = 0;
                        for j in 1..ctx.len() {
                            if row[ctx[j]] > row[ctx[best]] {
                                best = j;
                            }
                        }
                        best
                    })
                    .collect()
            })
            .collect();

        let mut group_ids: HashMap<&[usize], usize> = HashMap::new();
        let mut policy_group = Vec::with_capacity(optimal.len());
        for map in &optimal {
            let next = group_ids.len();
            policy_group.push(*group_ids.entry(map.as_slice()).or_insert(next));
        }
        let num_groups = group_ids.len();

        let mut set_ids: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut classes = Vec::new();
        let mut class_set_of = Vec::with_capacity(num_actions);
        for r in &reveals {
            if let Some(&id) = set_ids.get(r) {
                class_set_of.push(id);
                continue;
            }
            let mut ids: HashMap<Vec<u64>, usize> = HashMap::new();
            let mut class_of = Vec::with_capacity(means.len());
            let mut cmeans = Vec::new();
            for row in &means {
                let v: Vec<f64> = r.iter().map(|&a| row[a]).collect();
                let next = ids.len();
                let c = *ids.entry(key_of(&v)).or_insert(next);
                if c == cmeans.len() {
                    cmeans.push(v);
                }
                class_of.push(c);
            }
            let id = classes.len();
            classes.push(ObsClasses {
                revealed: r.clone(),
                class_of,
                means: cmeans,
            });
            set_ids.insert(r.clone(), id);
            class_set_of.push(id);
        }

        Ok(Self {
            num_actions,
            contexts,
            xi,
            support,
            noise,
            reveals,
            means,
            optimal,
            policy_group,
            num_groups,
            classes,
            class_set_of,
        })
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_contexts(&self) -> usize {
        self.contexts.len()
    }

    pub fn contexts(&self) -> &[Vec<usize>] {
        &self.contexts
    }

    /// Global ids of the actions available in context `m`.
    pub fn actions(&self, m: usize) -> &[usize] {
        &self.contexts[m]
    }

    pub fn context_sizes(&self) -> Vec<usize> {
        self.contexts.iter().map(Vec::len).collect()
    }

    pub fn xi(&self) -> &ContextDistribution {
        &self.xi
    }

    pub fn support(&self) -> &Arc<ParamSupport> {
        &self.support
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    pub fn reveals(&self, a: usize) -> &[usize] {
        &self.reveals[a]
    }

    /// Expected reward of global action `a` under atom `i`.
    pub fn mean(&self, i: usize, a: usize) -> f64 {
        self.means[i][a]
    }

    /// Local index (within context `m`) of atom `i`'s optimal action.
    pub fn optimal_local(&self, i: usize, m: usize) -> usize {
        self.optimal[i][m]
    }

    /// Global id of atom `i`'s optimal action in context `m`.
    pub fn optimal_action(&self, i: usize, m: usize) -> usize {
        self.contexts[m][self.optimal[i][m]]
    }

    pub fn policy_group(&self, i: usize) -> usize {
        self.policy_group[i]
    }

    pub fn num_policy_groups(&self) -> usize {
        self.num_groups
    }

    /// Observation classes for the revealed set of action `a`.
    pub fn classes(&self, a: usize) -> &ObsClasses {
        &self.classes[self.class_set_of[a]]
    }

    /// Index of action `a`'s revealed set among the distinct sets.
    pub fn reveal_set_id(&self, a: usize) -> usize {
        self.class_set_of[a]
    }

    pub fn check_context(&self, m: usize) -> Result<()> {
        if m >= self.contexts.len() {
            return Err(Error::BadContext(m));
        }
        Ok(())
    }

    /// Position of global action `a` within context `m`.
    pub fn local_index(&self, m: usize, a: usize) -> Option<usize> {
        self.contexts[m].iter().position(|&b| b == a)
    }

    /// Observation produced by playing `a` when atom `i` is true, given one
    /// standard normal draw per action.
    pub fn observe(&self, i: usize, a: usize, noise: &[f64]) -> Observation {
        let std = self.noise.std();
        Observation {
            chosen_action: a,
            revealed: self.reveals[a]
                .iter()
                .map(|&b| (b, self.means[i][b] + std * noise[b]))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn support() -> Arc<ParamSupport> {
        Arc::new(
            ParamSupport::uniform(vec![
                vec![0.0, 1.0, 2.0],
                vec![0.0, 3.0, 2.0],
                vec![1.0, 1.0, 0.0],
            ])
            .unwrap(),
        )
    }

    fn env(reveals: Vec<Vec<usize>>) -> Result<Environment> {
        Environment::new(
            3,
            vec![vec![0, 1], vec![1, 2]],
            ContextDistribution::uniform(2).unwrap(),
            support(),
            NoiseModel::gaussian(0.5).unwrap(),
            reveals,
            |th, a| th[a],
        )
    }

    #[test]
    fn tabulates_optima_and_classes() {
        let e = env(vec![vec![0], vec![1, 0], vec![2]]).unwrap();
        assert_eq!(e.optimal_action(0, 0), 1);
        // Tie at 1.0 goes to the first listed action.
        assert_eq!(e.optimal_action(2, 0), 0);
        assert_eq!(e.optimal_action(2, 1), 1);
        assert_eq!(e.num_policy_groups(), 3);
        assert_eq!(e.reveals(1), &[0, 1]);
        assert_eq!(e.classes(0).class_of, vec![0, 0, 1]);
        assert_eq!(e.classes(1).class_of, vec![0, 1, 2]);
        assert_eq!(e.classes(2).means, vec![vec![2.0], vec![0.0]]);
        assert_eq!(e.local_index(1, 2), Some(1));
        assert_eq!(e.local_index(1, 0), None);
    }

    #[test]
    fn shared_revealed_sets_share_classes() {
        let e = env(vec![vec![0, 2], vec![1], vec![2, 0]]).unwrap();
        assert_eq!(e.reveal_set_id(0), e.reveal_set_id(2));
        assert_ne!(e.reveal_set_id(0), e.reveal_set_id(1));
    }

    #[test]
    fn observe_adds_scaled_noise() {
        let e = env(vec![vec![0, 1], vec![1], vec![2]]).unwrap();
        let o = e.observe(1, 0, &[1.0, -2.0, 0.0]);
        assert_eq!(o.chosen_action, 0);
        assert_eq!(o.revealed, vec![(0, 0.5), (1, 2.0)]);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(env(vec![vec![0], vec![1]]).is_err());
        assert!(env(vec![vec![0], vec![1], vec![3]]).is_err());
        let mk = |contexts: Vec<Vec<usize>>, m: usize| {
            Environment::new(
                3,
                contexts,
                ContextDistribution::uniform(m).unwrap(),
                support(),
                NoiseModel::Noiseless,
                vec![vec![0], vec![1], vec![2]],
                |th, a| th[a],
            )
        };
        assert!(mk(vec![vec![0, 0]], 1).is_err());
        assert!(mk(vec![vec![]], 1).is_err());
        assert!(mk(vec![vec![5]], 1).is_err());
        assert!(mk(vec![vec![0]], 2).is_err());
        let e = mk(vec![vec![0, 1, 2]], 1).unwrap();
        assert!(matches!(e.check_context(1), Err(Error::BadContext(1))));
        let nan = Environment::new(
            1,
            vec![vec![0]],
            ContextDistribution::uniform(1).unwrap(),
            support(),
            NoiseModel::Noiseless,
            vec![vec![0]],
            |_, _| f64::NAN,
        );
        assert!(nan.is_err());
    }
}
