use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::graph::{
    make_example1, make_example2, make_theorem2_instance, random_graph_instance,
    random_strongly_observable, random_weakly_observable, FeedbackGraph, GraphBanditEnv,
    RandomInstanceSpec,
};
use crate::ids::{AgentKind, IRConfig};
use crate::infogain::InfoGainConfig;
use crate::posterior::{r_max, ContextDistribution, NoiseModel, ParamSupport};
use crate::sparse::{
    make_theorem3_instance_with, random_sparse_instance, FeatureMap, HMode, SparseLinearEnv,
};

pub const SCHEMA_VERSION: u32 = 1;

fn one() -> f64 {
    1.0
}

/// Instance constructor and its parameters. `n` defaults to the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    Example1 {
        k: usize,
    },
    Example2 {
        k: usize,
        #[serde(default = "one")]
        c_rev: f64,
        #[serde(default = "one")]
        c_gap: f64,
        #[serde(default)]
        n: Option<usize>,
    },
    Theorem2 {
        k: usize,
        #[serde(default)]
        n: Option<usize>,
    },
    Theorem3 {
        p: usize,
        s: usize,
        #[serde(default = "one")]
        kappa: f64,
        #[serde(default)]
        gap: Option<f64>,
        #[serde(default)]
        n: Option<usize>,
        #[serde(default)]
        h_mode: HMode,
    },
    RandomStrong {
        spec: RandomInstanceSpec,
        instance_seed: u64,
    },
    RandomWeak {
        spec: RandomInstanceSpec,
        instance_seed: u64,
    },
    RandomSparse {
        d: usize,
        s: usize,
        contexts: usize,
        actions: usize,
        atoms: usize,
        instance_seed: u64,
    },
    /// Graph from a file; `contexts` list action ids, `atoms` give one mean
    /// per action.
    GraphFile {
        graph: PathBuf,
        contexts: Vec<Vec<usize>>,
        #[serde(default)]
        xi: Option<Vec<f64>>,
        atoms: Vec<Vec<f64>>,
        #[serde(default)]
        prior: Option<Vec<f64>>,
        #[serde(default)]
        noise: NoiseModel,
    },
    FeatureFile {
        features: PathBuf,
        s: usize,
        #[serde(default)]
        xi: Option<Vec<f64>>,
        atoms: Vec<Vec<f64>>,
        #[serde(default)]
        prior: Option<Vec<f64>>,
        #[serde(default)]
        noise: NoiseModel,
    },
}

/// One agent of an experiment. `alpha_scale`, when set, overrides `alpha`
/// with `alpha_scale * R_max / sqrt(n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(flatten)]
    pub kind: AgentKind,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub alpha_scale: Option<f64>,
    #[serde(default = "two")]
    pub lambda: u32,
    #[serde(default)]
    pub fw_max_iters: Option<usize>,
    #[serde(default)]
    pub fw_tol: Option<f64>,
}

fn two() -> u32 {
    2
}

impl AgentSpec {
    pub fn new(kind: AgentKind, alpha: f64, lambda: u32) -> Self {
        Self {
            name: None,
            kind,
            alpha,
            alpha_scale: None,
            lambda,
            fw_max_iters: None,
            fw_tol: None,
        }
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind.label())
    }

    pub fn ir_config(&self, r_max: f64, n: usize) -> IRConfig {
        let mut c = IRConfig::new(self.alpha, self.lambda);
        if let Some(a) = self.alpha_scale {
            c.alpha = a * r_max / (n.max(1) as f64).sqrt();
        }
        if let Some(x) = self.fw_max_iters {
            c.fw_max_iters = x;
        }
        if let Some(x) = self.fw_tol {
            c.fw_tol = x;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub env: EnvSpec,
    pub agents: Vec<AgentSpec>,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub estimator: InfoGainConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub bound_overlays: bool,
    /// Worker threads; `None` uses all available cores.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML config; relative file paths inside resolve against the
    /// config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        match &mut cfg.env {
            EnvSpec::GraphFile { graph, .. } if graph.is_relative() => *graph = base.join(&*graph),
            EnvSpec::FeatureFile { features, .. } if features.is_relative() => {
                *features = base.join(&*features)
            }
            _ => {}
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.agents.is_empty() {
            return bad("at least one agent is required".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        let mut seen = HashSet::new();
        for a in &self.agents {
            a.kind
                .validate()
                .map_err(|e| Error::Config(e.to_string()))?;
            a.ir_config(1.0, self.horizon)
                .validate()
                .map_err(|e| Error::Config(e.to_string()))?;
            if a.alpha_scale.is_some_and(|x| !(x >= 0.0 && x.is_finite())) {
                return bad("alpha_scale must be finite and nonnegative".into());
            }
            if !seen.insert(a.label()) {
                return bad(format!(
                    "duplicate agent label {:?}; give one of them a name",
                    a.label()
                ));
            }
        }
        let mut s = HashSet::new();
        if !self.seeds.iter().all(|x| s.insert(*x)) {
            return bad("seeds must be distinct".into());
        }
        self.estimator
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }
}

/// Structural information the audits and bound curves need.
#[derive(Debug, Clone)]
pub enum EnvFamily {
    Graph(FeedbackGraph),
    Sparse { features: FeatureMap, s: usize },
}

#[derive(Debug, Clone)]
pub struct BuiltEnv {
    pub env: Environment,
    pub family: EnvFamily,
    pub meta: Vec<(String, f64)>,
}

impl BuiltEnv {
    pub fn r_max(&self) -> f64 {
        r_max(&self.env)
    }
}

impl From<GraphBanditEnv> for BuiltEnv {
    fn from(g: GraphBanditEnv) -> Self {
        Self {
            env: g.env,
            family: EnvFamily::Graph(g.graph),
            meta: g.meta,
        }
    }
}

impl From<SparseLinearEnv> for BuiltEnv {
    fn from(s: SparseLinearEnv) -> Self {
        Self {
            env: s.env,
            family: EnvFamily::Sparse {
                features: s.features,
                s: s.s,
            },
            meta: s.meta,
        }
    }
}

fn support_from(atoms: Vec<Vec<f64>>, prior: Option<Vec<f64>>) -> Result<ParamSupport> {
    match prior {
        Some(w) => ParamSupport::new(atoms, w),
        None => ParamSupport::uniform(atoms),
    }
}

fn xi_from(xi: Option<Vec<f64>>, m: usize) -> Result<ContextDistribution> {
    match xi {
        Some(p) => ContextDistribution::new(p),
        None => ContextDistribution::uniform(m),
    }
}

impl EnvSpec {
    pub fn build(&self, horizon: usize) -> Result<BuiltEnv> {
        Ok(match self.clone() {
            EnvSpec::Example1 { k } => make_example1(k)?.into(),
            EnvSpec::Example2 { k, c_rev, c_gap, n } => {
                make_example2(k, n.unwrap_or(horizon), c_rev, c_gap)?.into()
            }
            EnvSpec::Theorem2 { k, n } => make_theorem2_instance(k, n.unwrap_or(horizon))?.into(),
            EnvSpec::Theorem3 {
                p,
                s,
                kappa,
                gap,
                n,
                h_mode,
            } => {
                make_theorem3_instance_with(p, s, n.unwrap_or(horizon), kappa, gap, h_mode)?.into()
            }
            EnvSpec::RandomStrong {
                spec,
                instance_seed,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(instance_seed);
                let g =
                    random_strongly_observable(spec.k, spec.edge_prob, spec.loop_prob, &mut rng)?;
                random_graph_instance(g, &spec, &mut rng)?.into()
            }
            EnvSpec::RandomWeak {
                spec,
                instance_seed,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(instance_seed);
                let g = random_weakly_observable(spec.k, spec.edge_prob, spec.loop_prob, &mut rng)?;
                random_graph_instance(g, &spec, &mut rng)?.into()
            }
            EnvSpec::RandomSparse {
                d,
                s,
                contexts,
                actions,
                atoms,
                instance_seed,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(instance_seed);
                random_sparse_instance(d, s, contexts, actions, atoms, &mut rng)?.into()
            }
            EnvSpec::GraphFile {
                graph,
                contexts,
                xi,
                atoms,
                prior,
                noise,
            } => {
                let g = FeedbackGraph::read(&graph)?;
                let m = contexts.len();
                GraphBanditEnv::new(
                    g,
                    contexts,
                    xi_from(xi, m)?,
                    support_from(atoms, prior)?,
                    noise,
                )?
                .into()
            }
            EnvSpec::FeatureFile {
                features,
                s,
                xi,
                atoms,
                prior,
                noise,
            } => {
                let f = FeatureMap::read(&features)?;
                let m = f.num_contexts();
                SparseLinearEnv::new(f, xi_from(xi, m)?, support_from(atoms, prior)?, s, noise)?
                    .into()
            }
        })
    }
}
