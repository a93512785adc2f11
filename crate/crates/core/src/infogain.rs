//! Mutual information between an action's observation and a latent target.
//!
//! The latent `G` is a function of the atom: the optimal action of one
//! context, the whole optimal policy map, or the atom itself. The observation
//! `O` of action `a` depends on the atom only through its observation class
//! (atoms sharing a mean vector on the revealed set), so `G - C - O` is a
//! Markov chain and
//!
//! `I(G;O) = sum_{g,c} P(g,c) E[log p(O|g) - log p(O) | C=c]`.
//!
//! Means are divided by the noise std and restricted to the coordinates that
//! actually vary between classes. When the class means span an affine space
//! of dimension at most two the inner expectation is a Gauss-Hermite rule;
//! otherwise it is a Monte-Carlo average over a fixed table of normal draws
//! (common random numbers) with stratified class selection.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::{Environment, ObsClasses};
use crate::error::{Error, Result};
use crate::posterior::{entropy, optimal_policy_posterior, NoiseModel, Posterior};
use crate::quadrature::GaussHermite;

/// Atoms lighter than this are left out of the integration.
pub const COMPONENT_DROP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    #[default]
    Quadrature,
    MonteCarlo,
}

/// Latent variable the agents buy information about. `OptimalAction` and
/// `OptimalPolicy` keep each agent on its own target (a* for conditional
/// agents, the policy map for contextual ones); `Parameter` switches both to
/// the atom itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GainTarget {
    #[default]
    OptimalAction,
    OptimalPolicy,
    Parameter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InfoGainConfig {
    pub estimator: Estimator,
    pub quadrature_nodes: usize,
    pub mc_samples: usize,
    pub floor: f64,
    pub target: GainTarget,
    pub mc_seed: u64,
}

impl Default for InfoGainConfig {
    fn default() -> Self {
        Self {
            estimator: Estimator::Quadrature,
            quadrature_nodes: 64,
            mc_samples: 4096,
            floor: 1e-12,
            target: GainTarget::OptimalAction,
            mc_seed: 0x1d5_9a17,
        }
    }
}

impl InfoGainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.quadrature_nodes < 8 {
            return Err(Error::invalid("quadrature_nodes must be at least 8"));
        }
        if self.mc_samples < 256 {
            return Err(Error::invalid("mc_samples must be at least 256"));
        }
        if !(self.floor > 0.0 && self.floor.is_finite()) {
            return Err(Error::invalid("floor must be positive"));
        }
        Ok(())
    }
}

/// Gains with the Monte-Carlo standard error of each entry (0 when exact).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InfoGainVector {
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
}

impl InfoGainVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One mutual-information estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    const ZERO: Estimate = Estimate {
        value: 0.0,
        std_error: 0.0,
    };
}

/// Joint law of (latent group, observation class) over the surviving atoms.
struct Joint {
    /// P(c) per compact class.
    pc: Vec<f64>,
    /// Original class index of each compact class.
    class_ids: Vec<usize>,
    /// For each compact class: (group, P(g|c)).
    groups_of_class: Vec<Vec<(usize, f64)>>,
    /// For each group: (compact class, ln P(c|g)).
    classes_of_group: Vec<Vec<(usize, f64)>>,
    pg: Vec<f64>,
}

fn build_joint(weights: &[f64], latent: &[usize], class_of: &[usize]) -> Joint {
    let mut gmap: HashMap<usize, usize> = HashMap::new();
    let mut cmap: HashMap<usize, usize> = HashMap::new();
    let mut class_ids = Vec::new();
    let mut cells: HashMap<(usize, usize), f64> = HashMap::new();
    let mut total = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        if w < COMPONENT_DROP {
            continue;
        }
        total += w;
        let ng = gmap.len();
        let g = *gmap.entry(latent[i]).or_insert(ng);
        let nc = cmap.len();
        let c = *cmap.entry(class_of[i]).or_insert_with(|| {
            class_ids.push(class_of[i]);
            nc
        });
        *cells.entry((g, c)).or_insert(0.0) += w;
    }
    let ng = gmap.len();
    let nc = cmap.len();
    let mut pc = vec![0.0; nc];
    let mut pg = vec![0.0; ng];
    let mut sorted: Vec<((usize, usize), f64)> = cells.into_iter().collect();
    sorted.sort_by_key(|&(k, _)| k);
    for &((g, c), w) in &sorted {
        pc[c] += w / total;
        pg[g] += w / total;
    }
    let mut groups_of_class = vec![Vec::new(); nc];
    let mut classes_of_group = vec![Vec::new(); ng];
    for &((g, c), w) in &sorted {
        let p = w / total;
        groups_of_class[c].push((g, p / pc[c]));
        classes_of_group[g].push((c, (p / pg[g]).ln()));
    }
    Joint {
        pc,
        class_ids,
        groups_of_class,
        classes_of_group,
        pg,
    }
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Integrand `sum_g P(g|c) ln p(o|g) - ln p(o)` given the log kernels
/// `lk[c'] = ln N(o; mu_c', I)` up to a shared constant.
fn integrand(j: &Joint, c: usize, lk: &[f64], log_pc: &[f64]) -> f64 {
    let lpo = log_sum_exp(log_pc.iter().zip(lk).map(|(a, b)| a + b));
    let mut s = 0.0;
    for &(g, pgc) in &j.groups_of_class[c] {
        let cg = &j.classes_of_group[g];
        let lpg = if cg.len() == 1 {
            lk[cg[0].0]
        } else {
            log_sum_exp(cg.iter().map(|&(c2, l)| l + lk[c2]))
        };
        s += pgc * lpg;
    }
    s - lpo
}

/// Table of standard normal draws, one ChaCha stream per column, shared by
/// every caller that asks for the same `(seed, rows, cols)`.
fn normal_table(seed: u64, rows: usize, cols: usize) -> Arc<Vec<f64>> {
    type Key = (u64, usize, usize);
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<Vec<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut g = cache.lock().unwrap_or_else(|e| e.into_inner());
    Arc::clone(g.entry((seed, rows, cols)).or_insert_with(|| {
        let mut t = vec![0.0; rows * cols];
        for j in 0..cols {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64 + 1);
            for r in 0..rows {
                t[r * cols + j] = rng.sample(StandardNormal);
            }
        }
        Arc::new(t)
    }))
}

fn uniform_table(seed: u64, rows: usize) -> Arc<Vec<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, usize), Arc<Vec<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut g = cache.lock().unwrap_or_else(|e| e.into_inner());
    Arc::clone(g.entry((seed, rows)).or_insert_with(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0);
        Arc::new((0..rows).map(|_| rng.random::<f64>()).collect())
    }))
}

/// Orthonormal basis of span{v_1 - v_0, ...}, stopping once `cap` directions
/// are found.
fn affine_basis(points: &[Vec<f64>], cap: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let Some(p0) = points.first() else {
        return basis;
    };
    let scale = points
        .iter()
        .flatten()
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(1.0);
    for p in &points[1..] {
        let mut v: Vec<f64> = p.iter().zip(p0).map(|(a, b)| a - b).collect();
        for _ in 0..2 {
            for b in &basis {
                let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= d * y;
                }
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-10 * scale {
            for x in &mut v {
                *x /= n;
            }
            basis.push(v);
            if basis.len() >= cap {
                break;
            }
        }
    }
    basis
}

/// `I(G;O)` for the observation described by `classes` with the latent
/// labels `latent` (one per atom).
pub fn mutual_information(
    weights: &[f64],
    latent: &[usize],
    classes: &ObsClasses,
    noise: NoiseModel,
    cfg: &InfoGainConfig,
) -> Estimate {
    let j = build_joint(weights, latent, &classes.class_of);
    if j.pg.len() <= 1 || j.pc.len() <= 1 {
        return Estimate::ZERO;
    }
    let est = match noise {
        NoiseModel::Noiseless => {
            let hg = entropy(&j.pg);
            let hgc: f64 = j
                .groups_of_class
                .iter()
                .zip(&j.pc)
                .map(|(gs, &p)| p * entropy(&gs.iter().map(|&(_, q)| q).collect::<Vec<_>>()))
                .sum();
            Estimate {
                value: hg - hgc,
                std_error: 0.0,
            }
        }
        NoiseModel::Gaussian { std } => gaussian_mi(&j, classes, std, cfg),
    };
    finish(est, cfg.floor)
}

fn finish(e: Estimate, floor: f64) -> Estimate {
    let v = if e.value.is_finite() {
        e.value.max(0.0)
    } else {
        0.0
    };
    Estimate {
        value: if v < floor { 0.0 } else { v },
        std_error: if e.std_error.is_finite() {
            e.std_error
        } else {
            0.0
        },
    }
}

fn gaussian_mi(j: &Joint, classes: &ObsClasses, std: f64, cfg: &InfoGainConfig) -> Estimate {
    let nc = j.pc.len();
    let full_dim = classes.revealed.len();
    let raw: Vec<&Vec<f64>> = j.class_ids.iter().map(|&c| &classes.means[c]).collect();
    // Coordinates on which the surviving classes disagree.
    let dims: Vec<usize> = (0..full_dim)
        .filter(|&d| raw.iter().any(|m| m[d] != raw[0][d]))
        .collect();
    if dims.is_empty() {
        return Estimate::ZERO;
    }
    let mu: Vec<Vec<f64>> = raw
        .iter()
        .map(|m| dims.iter().map(|&d| m[d] / std).collect())
        .collect();
    let log_pc: Vec<f64> = j.pc.iter().map(|p| p.ln()).collect();

    let basis = affine_basis(&mu, 3);
    if cfg.estimator == Estimator::Quadrature && basis.len() <= 2 {
        let y: Vec<Vec<f64>> = mu
            .iter()
            .map(|m| {
                basis
                    .iter()
                    .map(|b| b.iter().zip(m).map(|(x, z)| x * z).sum())
                    .collect()
            })
            .collect();
        return quadrature_mi(j, &y, &log_pc, cfg.quadrature_nodes);
    }

    // Sparse offsets from a per-coordinate reference value.
    let l = dims.len();
    let mut reference = vec![0.0; l];
    for (d, r) in reference.iter_mut().enumerate() {
        let mut counts: Vec<(f64, usize)> = Vec::new();
        for m in &mu {
            match counts.iter_mut().find(|(v, _)| *v == m[d]) {
                Some(e) => e.1 += 1,
                None => counts.push((m[d], 1)),
            }
        }
        *r = counts
            .iter()
            .fold(
                (0.0, 0usize),
                |best, &(v, n)| if n > best.1 { (v, n) } else { best },
            )
            .0;
    }
    let deltas: Vec<Vec<(usize, f64)>> = mu
        .iter()
        .map(|m| {
            (0..l)
                .filter(|&d| m[d] != reference[d])
                .map(|d| (d, m[d] - reference[d]))
                .collect()
        })
        .collect();
    let half_sq: Vec<f64> = deltas
        .iter()
        .map(|v| 0.5 * v.iter().map(|(_, x)| x * x).sum::<f64>())
        .collect();

    let s = cfg.mc_samples;
    let z = normal_table(cfg.mc_seed, s, full_dim);
    let uni = uniform_table(cfg.mc_seed, s);
    let mut cum = Vec::with_capacity(nc);
    let mut acc = 0.0;
    for &p in &j.pc {
        acc += p;
        cum.push(acc);
    }
    let mut u = vec![0.0; l];
    let mut lk = vec![0.0; nc];
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for r in 0..s {
        let target = (r as f64 + uni[r]) / s as f64 * acc;
        let c = cum.partition_point(|&x| x <= target).min(nc - 1);
        let row = &z[r * full_dim..(r + 1) * full_dim];
        for (k, &d) in dims.iter().enumerate() {
            u[k] = row[d];
        }
        for &(d, x) in &deltas[c] {
            u[d] += x;
        }
        for (c2, dv) in deltas.iter().enumerate() {
            let dot: f64 = dv.iter().map(|&(d, x)| u[d] * x).sum();
            lk[c2] = dot - half_sq[c2];
        }
        let f = integrand(j, c, &lk, &log_pc);
        sum += f;
        sum_sq += f * f;
    }
    let mean = sum / s as f64;
    let var = (sum_sq / s as f64 - mean * mean).max(0.0);
    Estimate {
        value: mean,
        std_error: (var / s as f64).sqrt(),
    }
}

fn quadrature_mi(j: &Joint, y: &[Vec<f64>], log_pc: &[f64], nodes: usize) -> Estimate {
    let gh = GaussHermite::cached(nodes);
    let nc = y.len();
    let r = y[0].len();
    let mut lk = vec![0.0; nc];
    let mut total = 0.0;
    let mut o = vec![0.0; r];
    let kernel = |o: &[f64], lk: &mut [f64]| {
        for (c2, yc) in y.iter().enumerate() {
            let d2: f64 = o.iter().zip(yc).map(|(a, b)| (a - b) * (a - b)).sum();
            lk[c2] = -0.5 * d2;
        }
    };
    for c in 0..nc {
        let mut inner = 0.0;
        match r {
            0 => {}
            1 => {
                for (x, w) in gh.nodes.iter().zip(&gh.weights) {
                    o[0] = y[c][0] + x;
                    kernel(&o, &mut lk);
                    inner += w * integrand(j, c, &lk, log_pc);
                }
            }
            _ => {
                for (x1, w1) in gh.nodes.iter().zip(&gh.weights) {
                    for (x2, w2) in gh.nodes.iter().zip(&gh.weights) {
                        o[0] = y[c][0] + x1;
                        o[1] = y[c][1] + x2;
                        kernel(&o, &mut lk);
                        inner += w1 * w2 * integrand(j, c, &lk, log_pc);
                    }
                }
            }
        }
        total += j.pc[c] * inner;
    }
    Estimate {
        value: total,
        std_error: 0.0,
    }
}

fn latent_for_context(post: &Posterior, env: &Environment, m: usize) -> Vec<usize> {
    (0..post.len()).map(|i| env.optimal_local(i, m)).collect()
}

fn latent_for_policy(post: &Posterior, env: &Environment) -> Vec<usize> {
    (0..post.len()).map(|i| env.policy_group(i)).collect()
}

fn check_noise(env: &Environment) -> Result<()> {
    if let NoiseModel::Gaussian { std } = env.noise() {
        if !(std > 0.0 && std.is_finite()) {
            return Err(Error::Unsupported(format!("gaussian noise with std {std}")));
        }
    }
    Ok(())
}

fn gains_over(
    post: &Posterior,
    env: &Environment,
    actions: &[usize],
    latent: &[usize],
    cfg: &InfoGainConfig,
) -> Result<InfoGainVector> {
    cfg.validate()?;
    check_noise(env)?;
    let mut cache: HashMap<usize, Estimate> = HashMap::new();
    let mut out = InfoGainVector {
        values: Vec::with_capacity(actions.len()),
        std_errors: Vec::with_capacity(actions.len()),
    };
    for &a in actions {
        let e = *cache.entry(env.reveal_set_id(a)).or_insert_with(|| {
            mutual_information(post.weights(), latent, env.classes(a), env.noise(), cfg)
        });
        out.values.push(e.value);
        out.std_errors.push(e.std_error);
    }
    Ok(out)
}

/// `I(a*_m ; O_a)` for every action of context `m` (local order).
pub fn cond_info_gain(
    post: &Posterior,
    context: usize,
    env: &Environment,
    cfg: &InfoGainConfig,
) -> Result<InfoGainVector> {
    env.check_context(context)?;
    let latent = latent_for_context(post, env, context);
    gains_over(post, env, env.actions(context), &latent, cfg)
}

/// `I(pi* ; O_a)` for every global action.
pub fn marg_info_gain(
    post: &Posterior,
    env: &Environment,
    cfg: &InfoGainConfig,
) -> Result<InfoGainVector> {
    let latent = latent_for_policy(post, env);
    let all: Vec<usize> = (0..env.num_actions()).collect();
    gains_over(post, env, &all, &latent, cfg)
}

/// `I(pi* ; O_a)` for a chosen subset of global actions.
pub fn marg_info_gain_for(
    post: &Posterior,
    env: &Environment,
    actions: &[usize],
    cfg: &InfoGainConfig,
) -> Result<InfoGainVector> {
    let latent = latent_for_policy(post, env);
    gains_over(post, env, actions, &latent, cfg)
}

/// `I(theta* ; O_a)` for every global action.
pub fn param_info_gain(
    post: &Posterior,
    env: &Environment,
    cfg: &InfoGainConfig,
) -> Result<InfoGainVector> {
    let latent: Vec<usize> = (0..post.len()).collect();
    let all: Vec<usize> = (0..env.num_actions()).collect();
    gains_over(post, env, &all, &latent, cfg)
}

/// Entropy of the optimal policy map under the posterior, in nats.
pub fn policy_entropy(post: &Posterior, env: &Environment) -> f64 {
    let p: Vec<f64> = optimal_policy_posterior(post, env)
        .into_iter()
        .map(|(_, w)| w)
        .collect();
    entropy(&p)
}

/// KL between the law of `Y_a` given `a*_context = a_opt` and its marginal
/// law. `a` and `a_opt` are global action ids; `a_opt` must belong to the
/// context.
pub fn kl_obs_given_opt(
    post: &Posterior,
    context: usize,
    a: usize,
    a_opt: usize,
    env: &Environment,
    cfg: &InfoGainConfig,
) -> Result<f64> {
    env.check_context(context)?;
    check_noise(env)?;
    if a >= env.num_actions() {
        return Err(Error::BadAction {
            action: a,
            reason: "out of range".into(),
        });
    }
    let local = env
        .local_index(context, a_opt)
        .ok_or_else(|| Error::BadAction {
            action: a_opt,
            reason: format!("not available in context {context}"),
        })?;
    let w = post.weights();
    let cond: Vec<f64> = (0..w.len())
        .map(|i| {
            if env.optimal_local(i, context) == local {
                w[i]
            } else {
                0.0
            }
        })
        .collect();
    let pz: f64 = cond.iter().sum();
    if pz <= 0.0 {
        return Err(Error::ZeroProbability);
    }

    // Distinct values of the scalar mean, with conditional and marginal mass.
    let mut vals: Vec<(f64, f64, f64)> = Vec::new();
    for i in 0..w.len() {
        if w[i] < COMPONENT_DROP {
            continue;
        }
        let mu = env.mean(i, a);
        match vals.iter_mut().find(|(v, _, _)| *v == mu) {
            Some(e) => {
                e.1 += cond[i] / pz;
                e.2 += w[i];
            }
            None => vals.push((mu, cond[i] / pz, w[i])),
        }
    }
    let tot: f64 = vals.iter().map(|v| v.2).sum();
    for v in &mut vals {
        v.2 /= tot;
    }
    let kl = match env.noise() {
        NoiseModel::Noiseless => vals
            .iter()
            .filter(|v| v.1 > 0.0)
            .map(|v| v.1 * (v.1 / v.2).ln())
            .sum::<f64>(),
        NoiseModel::Gaussian { std } => {
            let gh = GaussHermite::cached(cfg.quadrature_nodes.max(8));
            let lp: Vec<f64> = vals
                .iter()
                .map(|v| {
                    if v.1 > 0.0 {
                        v.1.ln()
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect();
            let lq: Vec<f64> = vals.iter().map(|v| v.2.ln()).collect();
            let mut s = 0.0;
            for v in &vals {
                if v.1 <= 0.0 {
                    continue;
                }
                let mut inner = 0.0;
                for (x, wq) in gh.nodes.iter().zip(&gh.weights) {
                    let o = v.0 / std + x;
                    let lk: Vec<f64> = vals
                        .iter()
                        .map(|u| {
                            let d = o - u.0 / std;
                            -0.5 * d * d
                        })
                        .collect();
                    let a1 = log_sum_exp(lp.iter().zip(&lk).map(|(p, k)| p + k));
                    let a2 = log_sum_exp(lq.iter().zip(&lk).map(|(p, k)| p + k));
                    inner += wq * (a1 - a2);
                }
                s += v.1 * inner;
            }
            s
        }
    };
    Ok(kl.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior::{optimal_action_probs, r_max, ContextDistribution, ParamSupport};
    use rand::Rng;

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

    fn random_env(rng: &mut ChaCha8Rng, atoms: usize, k: usize) -> Environment {
        let params = (0..atoms)
            .map(|_| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        bandit(
            params,
            vec![(0..k).collect()],
            NoiseModel::gaussian(1.0).unwrap(),
        )
    }

    #[test]
    fn point_mass_has_no_gain() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let env = random_env(&mut rng, 4, 3);
        let post = Posterior::point_mass(Arc::clone(env.support()), 2).unwrap();
        let cfg = InfoGainConfig::default();
        assert!(cond_info_gain(&post, 0, &env, &cfg)
            .unwrap()
            .values
            .iter()
            .all(|&v| v == 0.0));
        assert!(param_info_gain(&post, &env, &cfg)
            .unwrap()
            .values
            .iter()
            .all(|&v| v == 0.0));
        assert_eq!(policy_entropy(&post, &env), 0.0);
    }

    #[test]
    fn single_context_marginal_equals_conditional() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let env = random_env(&mut rng, 5, 4);
        let post =
            Posterior::with_weights(Arc::clone(env.support()), vec![0.1, 0.3, 0.2, 0.15, 0.25])
                .unwrap();
        let cfg = InfoGainConfig::default();
        let c = cond_info_gain(&post, 0, &env, &cfg).unwrap();
        let m = marg_info_gain(&post, &env, &cfg).unwrap();
        for (x, y) in c.values.iter().zip(&m.values) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_binary_reveal_gives_the_entropy() {
        let env = bandit(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0, 1]],
            NoiseModel::Noiseless,
        );
        let w = 0.3;
        let post = Posterior::with_weights(Arc::clone(env.support()), vec![w, 1.0 - w]).unwrap();
        let g = cond_info_gain(&post, 0, &env, &InfoGainConfig::default()).unwrap();
        let h = entropy(&[w, 1.0 - w]);
        assert!((g.values[0] - h).abs() < 1e-12);
        assert!((g.values[1] - h).abs() < 1e-12);
    }

    #[test]
    fn gain_is_bounded_by_the_entropy_of_the_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = InfoGainConfig::default();
        for _ in 0..20 {
            let env = random_env(&mut rng, 6, 3);
            let post = Posterior::prior(Arc::clone(env.support()));
            let h = entropy(&optimal_action_probs(&post, 0, &env).unwrap());
            for v in cond_info_gain(&post, 0, &env, &cfg).unwrap().values {
                assert!((-1e-12..=h + 1e-9).contains(&v), "{v} vs {h}");
            }
        }
    }

    /// Sub-Gaussian transport: `I(a*; Y_a) >= sum_j p_j (E[Y|j] - E[Y])^2 / (2 (R^2 + 1))`
    /// for unit noise and means bounded by `R`.
    #[test]
    fn gain_dominates_the_squared_mean_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = InfoGainConfig::default();
        for _ in 0..30 {
            let env = random_env(&mut rng, 5, 3);
            let post = Posterior::prior(Arc::clone(env.support()));
            let r = r_max(&env);
            let p = optimal_action_probs(&post, 0, &env).unwrap();
            let gains = cond_info_gain(&post, 0, &env, &cfg).unwrap();
            for a in 0..3 {
                let w = post.weights();
                let mean: f64 = (0..w.len()).map(|i| w[i] * env.mean(i, a)).sum();
                let mut shift = 0.0;
                for (j, &pj) in p.iter().enumerate() {
                    if pj == 0.0 {
                        continue;
                    }
                    let cm: f64 = (0..w.len())
                        .filter(|&i| env.optimal_local(i, 0) == j)
                        .map(|i| w[i] * env.mean(i, a))
                        .sum::<f64>()
                        / pj;
                    shift += pj * (cm - mean).powi(2);
                }
                let bound = shift / (2.0 * (r * r + 1.0));
                assert!(
                    gains.values[a] >= bound - 1e-12,
                    "{} < {bound}",
                    gains.values[a]
                );
            }
        }
    }

    #[test]
    fn gain_is_the_average_conditional_kl() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cfg = InfoGainConfig::default();
        for _ in 0..10 {
            let env = random_env(&mut rng, 5, 3);
            let post = Posterior::prior(Arc::clone(env.support()));
            let p = optimal_action_probs(&post, 0, &env).unwrap();
            let gains = cond_info_gain(&post, 0, &env, &cfg).unwrap();
            for a in 0..3 {
                let avg: f64 = (0..3)
                    .filter(|&j| p[j] > 0.0)
                    .map(|j| p[j] * kl_obs_given_opt(&post, 0, a, j, &env, &cfg).unwrap())
                    .sum();
                assert!(
                    (avg - gains.values[a]).abs() < 1e-8,
                    "{avg} vs {}",
                    gains.values[a]
                );
            }
        }
    }

    #[test]
    fn kl_edge_cases() {
        let env = bandit(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0, 1]],
            NoiseModel::gaussian(1.0).unwrap(),
        );
        let cfg = InfoGainConfig::default();
        let post = Posterior::prior(Arc::clone(env.support()));
        let k0 = kl_obs_given_opt(&post, 0, 0, 0, &env, &cfg).unwrap();
        let k1 = kl_obs_given_opt(&post, 0, 0, 1, &env, &cfg).unwrap();
        assert!(k0 > 0.0 && (k0 - k1).abs() < 1e-10);
        let point = Posterior::point_mass(Arc::clone(env.support()), 0).unwrap();
        assert!(kl_obs_given_opt(&point, 0, 0, 0, &env, &cfg).unwrap().abs() < 1e-12);
        assert!(matches!(
            kl_obs_given_opt(&point, 0, 0, 1, &env, &cfg),
            Err(Error::ZeroProbability)
        ));
        assert!(kl_obs_given_opt(&post, 0, 5, 0, &env, &cfg).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(InfoGainConfig::default().validate().is_ok());
        for bad in [
            InfoGainConfig {
                quadrature_nodes: 4,
                ..Default::default()
            },
            InfoGainConfig {
                mc_samples: 10,
                ..Default::default()
            },
            InfoGainConfig {
                floor: 0.0,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
