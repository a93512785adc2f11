use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{classify_observability, GraphClass};
use super::FeedbackGraph;
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::posterior::{ContextDistribution, NoiseModel, ParamSupport};

/// Graph-feedback environment: `f(s, a, theta) = theta_a` and playing `a`
/// reveals `Y_b` for every `b` in `N_out(a)`.
#[derive(Debug, Clone)]
pub struct GraphBanditEnv {
    pub graph: FeedbackGraph,
    pub env: Environment,
    /// Free-form construction parameters kept for run metadata.
    pub meta: Vec<(String, f64)>,
}

impl GraphBanditEnv {
    pub fn new(
        graph: FeedbackGraph,
        contexts: Vec<Vec<usize>>,
        xi: ContextDistribution,
        support: ParamSupport,
        noise: NoiseModel,
    ) -> Result<Self> {
        let k = graph.k();
        if support.dim() != k {
            return Err(Error::invalid(format!(
                "parameters have dimension {} but the graph has {k} vertices",
                support.dim()
            )));
        }
        let reveals = (0..k).map(|a| graph.out_neighbors(a)).collect();
        let env = Environment::new(
            k,
            contexts,
            xi,
            Arc::new(support),
            noise,
            reveals,
            |th, a| th[a],
        )?;
        Ok(Self {
            graph,
            env,
            meta: Vec::new(),
        })
    }

    pub fn meta_value(&self, key: &str) -> Option<f64> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }
}

/// Hard instance separating the two IDS variants on a graph with a large
/// independence number. Vertex `j` (0-based) stands for arm `x_{j+1}`.
pub fn make_theorem2_instance(k: usize, n: usize) -> Result<GraphBanditEnv> {
    if k < 5 {
        return Err(Error::invalid("the construction needs k >= 5"));
    }
    if n == 0 {
        return Err(Error::invalid("horizon must be positive"));
    }
    let gamma = 0.5 * (k as f64 / n as f64).sqrt();
    let mut edges: Vec<(usize, usize)> = (0..k - 1).map(|j| (j, j)).collect();
    edges.extend((0..k - 1).map(|j| (k - 1, j)));
    let graph = FeedbackGraph::new(k, &edges)?;
    let contexts = vec![vec![k - 2, k - 1], (0..k - 2).collect()];
    let xi = ContextDistribution::new(vec![0.5, 0.5])?;
    // Atoms theta^(i), i = 2..=k-2 in 1-based arm numbering.
    let params: Vec<Vec<f64>> = (2..=k - 2)
        .map(|i| {
            let mut th = vec![0.0; k];
            th[i - 1] = gamma;
            th[k - 1] = gamma - 1.0;
            th
        })
        .collect();
    let support = ParamSupport::uniform(params)?;
    let mut g = GraphBanditEnv::new(
        graph,
        contexts,
        xi,
        support,
        NoiseModel::Gaussian { std: 1.0 },
    )?;
    g.meta = vec![
        ("k".into(), k as f64),
        ("n".into(), n as f64),
        ("gamma".into(), gamma),
    ];
    Ok(g)
}

/// Noiseless instance where a zero-information-for-now action in context 2
/// reveals every reward of context 1. Actions `0..k` form context 1, `k` is
/// the revealing action and `k + 1` the safe action of context 2.
pub fn make_example1(k: usize) -> Result<GraphBanditEnv> {
    if k < 2 {
        return Err(Error::invalid("example needs k >= 2"));
    }
    let mut edges: Vec<(usize, usize)> = (0..k).map(|j| (j, j)).collect();
    edges.extend((0..k).map(|j| (k, j)));
    edges.push((k + 1, k + 1));
    let graph = FeedbackGraph::new(k + 2, &edges)?;
    let contexts = vec![(0..k).collect(), vec![k, k + 1]];
    let xi = ContextDistribution::uniform(2)?;
    let params: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut th = vec![0.0; k + 2];
            th[i] = 1.0;
            th[k] = -1.0;
            th
        })
        .collect();
    let support = ParamSupport::uniform(params)?;
    let mut g = GraphBanditEnv::new(graph, contexts, xi, support, NoiseModel::Noiseless)?;
    g.meta = vec![
        ("k".into(), k as f64),
        ("revealing_action".into(), k as f64),
    ];
    Ok(g)
}

/// Over-exploration instance. Action 0 is context 1's only (revealing)
/// action; context 2 holds the costly revealing action 1 and candidates
/// `2..=k`, one of which is optimal.
pub fn make_example2(k: usize, n: usize, c_rev: f64, c_gap: f64) -> Result<GraphBanditEnv> {
    if k < 3 {
        return Err(Error::invalid("example needs k >= 3"));
    }
    if n == 0 || !(c_rev > 0.0) || !(c_gap > 0.0) {
        return Err(Error::invalid("n, c_rev and c_gap must be positive"));
    }
    let gap = c_gap / (n as f64).sqrt();
    let rev_regret = c_rev * (k as f64).sqrt() * gap;
    let ctx2: Vec<usize> = (1..=k).collect();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for &b in &ctx2 {
        edges.push((0, b));
        edges.push((1, b));
    }
    edges.extend((2..=k).map(|j| (j, j)));
    let graph = FeedbackGraph::new(k + 1, &edges)?;
    let contexts = vec![vec![0], ctx2];
    let xi = ContextDistribution::uniform(2)?;
    let params: Vec<Vec<f64>> = (2..=k)
        .map(|opt| {
            let mut th = vec![0.0; k + 1];
            th[1] = -rev_regret;
            for (j, t) in th.iter_mut().enumerate().skip(2) {
                *t = if j == opt { 0.0 } else { -gap };
            }
            th
        })
        .collect();
    let support = ParamSupport::uniform(params)?;
    let mut g = GraphBanditEnv::new(
        graph,
        contexts,
        xi,
        support,
        NoiseModel::Gaussian { std: 1.0 },
    )?;
    g.meta = vec![
        ("k".into(), k as f64),
        ("n".into(), n as f64),
        ("c_rev".into(), c_rev),
        ("c_gap".into(), c_gap),
        ("gap".into(), gap),
        ("revealing_regret".into(), rev_regret),
    ];
    Ok(g)
}

/// Knobs for the random graph instances used by the audits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomInstanceSpec {
    pub k: usize,
    pub contexts: usize,
    pub atoms: usize,
    pub edge_prob: f64,
    pub loop_prob: f64,
    pub noise_std: f64,
}

impl Default for RandomInstanceSpec {
    fn default() -> Self {
        Self {
            k: 6,
            contexts: 2,
            atoms: 5,
            edge_prob: 0.3,
            loop_prob: 0.5,
            noise_std: 1.0,
        }
    }
}

fn random_edges<R: Rng + ?Sized>(
    k: usize,
    edge_prob: f64,
    loop_prob: f64,
    rng: &mut R,
) -> Vec<Vec<bool>> {
    (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    let p = if i == j { loop_prob } else { edge_prob };
                    rng.random::<f64>() < p
                })
                .collect()
        })
        .collect()
}

/// Random digraph in which every vertex has a self-loop or in-edges from
/// all others: vertices failing that get their self-loop added.
pub fn random_strongly_observable<R: Rng + ?Sized>(
    k: usize,
    edge_prob: f64,
    loop_prob: f64,
    rng: &mut R,
) -> Result<FeedbackGraph> {
    let mut adj = random_edges(k, edge_prob, loop_prob, rng);
    for v in 0..k {
        let strong = adj[v][v] || (0..k).all(|u| u == v || adj[u][v]);
        if !strong {
            adj[v][v] = true;
        }
    }
    FeedbackGraph::from_adjacency(adj)
}

/// Random observable but not strongly observable digraph (rejection
/// sampling; vertices without in-edges receive one from a random vertex).
pub fn random_weakly_observable<R: Rng + ?Sized>(
    k: usize,
    edge_prob: f64,
    loop_prob: f64,
    rng: &mut R,
) -> Result<FeedbackGraph> {
    if k < 2 {
        return Err(Error::invalid("a weakly observable graph needs k >= 2"));
    }
    for _ in 0..10_000 {
        let mut adj = random_edges(k, edge_prob, loop_prob, rng);
        for v in 0..k {
            if (0..k).all(|u| !adj[u][v]) {
                let mut u = rng.random_range(0..k - 1);
                if u >= v {
                    u += 1;
                }
                adj[u][v] = true;
            }
        }
        let g = FeedbackGraph::from_adjacency(adj)?;
        if classify_observability(&g).class == GraphClass::WeaklyObservable {
            return Ok(g);
        }
    }
    Err(Error::invalid(
        "could not draw a weakly observable graph with these probabilities",
    ))
}

/// Random contexts (each a nonempty subset, jointly covering all actions),
/// uniform context law, and a uniform prior over atoms with coordinates in
/// `[0, 1]`.
pub fn random_graph_instance<R: Rng + ?Sized>(
    graph: FeedbackGraph,
    spec: &RandomInstanceSpec,
    rng: &mut R,
) -> Result<GraphBanditEnv> {
    let k = graph.k();
    let m = spec.contexts.max(1);
    let mut contexts: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(rng);
    for (i, &a) in order.iter().enumerate() {
        contexts[i % m].push(a);
    }
    for ctx in contexts.iter_mut() {
        for a in 0..k {
            if !ctx.contains(&a) && rng.random::<f64>() < 0.3 {
                ctx.push(a);
            }
        }
        if ctx.is_empty() {
            ctx.push(rng.random_range(0..k));
        }
        ctx.sort_unstable();
    }
    let atoms = spec.atoms.max(1);
    let params: Vec<Vec<f64>> = (0..atoms)
        .map(|_| (0..k).map(|_| rng.random::<f64>()).collect())
        .collect();
    let support = ParamSupport::uniform(params)?;
    let noise = NoiseModel::gaussian(spec.noise_std)?;
    GraphBanditEnv::new(
        graph,
        contexts,
        ContextDistribution::uniform(m)?,
        support,
        noise,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{classify_observability, independence_number, VertexClass};
    use crate::posterior::{optimal_action_probs, Posterior};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hard_graph_gamma_and_prior() {
        let g = make_theorem2_instance(6, 100).unwrap();
        assert!((g.meta_value("gamma").unwrap() - 0.122_474_487).abs() < 1e-8);
        let w = g.env.support().prior_weights();
        assert_eq!(w.len(), 3);
        assert!(w.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn hard_graph_graph_structure() {
        for k in [6, 9] {
            let g = make_theorem2_instance(k, 100).unwrap();
            assert_eq!(independence_number(&g.graph).unwrap(), k - 1);
            let o = classify_observability(&g.graph);
            for v in 0..k - 1 {
                assert_eq!(o.vertices[v], VertexClass::Strong);
            }
            // the revealing arm has no in-edges at all
            assert_eq!(o.vertices[k - 1], VertexClass::Unobservable);
        }
    }

    #[test]
    fn hard_graph_context_one_optimum() {
        let g = make_theorem2_instance(8, 100).unwrap();
        let p =
            optimal_action_probs(&Posterior::prior(g.env.support().clone()), 0, &g.env).unwrap();
        assert_eq!(p, vec![1.0, 0.0]);
    }

    #[test]
    fn example_shapes() {
        let e1 = make_example1(4).unwrap();
        assert_eq!(e1.env.actions(1), &[4, 5]);
        assert_eq!(e1.env.reveals(4), &[0, 1, 2, 3]);
        let e2 = make_example2(16, 10_000, 1.0, 1.0).unwrap();
        assert!((e2.meta_value("gap").unwrap() - 0.01).abs() < 1e-15);
        assert!((e2.meta_value("revealing_regret").unwrap() - 0.04).abs() < 1e-15);
        assert_eq!(e2.env.actions(0), &[0]);
    }

    #[test]
    fn random_generators_respect_class() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let g = random_strongly_observable(6, 0.3, 0.3, &mut rng).unwrap();
            assert_eq!(
                classify_observability(&g).class,
                GraphClass::StronglyObservable
            );
            let h = random_weakly_observable(6, 0.3, 0.3, &mut rng).unwrap();
            assert_eq!(
                classify_observability(&h).class,
                GraphClass::WeaklyObservable
            );
        }
    }
}
