use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bounds::{bound_overlays, compute_metrics, BoundMetrics};
use super::config::{BuiltEnv, ExperimentConfig};
use super::episode::{run_episode, EpisodeAgent, Trajectory};
use crate::error::{Error, Result};
use crate::ids::AgentKind;
use crate::infogain::policy_entropy;
use crate::posterior::Posterior;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub agent: String,
    pub t: usize,
    pub mean_cum_regret: f64,
    pub std_cum_regret: f64,
    pub n_seeds: usize,
}

/// Outcome of one (agent, seed) cell.
#[derive(Debug)]
pub struct Cell {
    pub agent: String,
    pub seed: u64,
    pub result: Result<Trajectory>,
}

#[derive(Debug)]
pub struct ExperimentResult {
    /// Cells in (agent, seed) order.
    pub cells: Vec<Cell>,
    pub summary: Vec<SummaryRow>,
    pub metrics: BoundMetrics,
}

impl ExperimentResult {
    pub fn trajectories(&self, agent: &str) -> Vec<&Trajectory> {
        self.cells
            .iter()
            .filter(|c| c.agent == agent)
            .filter_map(|c| c.result.as_ref().ok())
            .collect()
    }

    pub fn failures(&self) -> Vec<(&str, u64, String)> {
        self.cells
            .iter()
            .filter_map(|c| {
                c.result
                    .as_ref()
                    .err()
                    .map(|e| (c.agent.as_str(), c.seed, e.to_string()))
            })
            .collect()
    }
}

/// Everything recorded next to a trajectory file so it can be audited on
/// its own later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub agent: String,
    pub agent_kind: AgentKind,
    pub alpha: f64,
    pub lambda: u32,
    pub seed: u64,
    pub horizon: usize,
    pub true_atom: usize,
    pub prior_policy_entropy: f64,
    pub metrics: BoundMetrics,
    pub env_meta: Vec<(String, f64)>,
    pub config: ExperimentConfig,
}

/// Mean and sample standard deviation of the cumulative regret per round,
/// folding trajectories in the given order.
pub fn summarize(agent: &str, trajs: &[&Trajectory], n: usize) -> Vec<SummaryRow> {
    let curves: Vec<Vec<f64>> = trajs.iter().map(|t| t.cum_regret()).collect();
    (0..n)
        .map(|i| {
            let xs: Vec<f64> = curves.iter().filter_map(|c| c.get(i).copied()).collect();
            let k = xs.len();
            let mean = if k > 0 {
                xs.iter().sum::<f64>() / k as f64
            } else {
                f64::NAN
            };
            let std = if k > 1 {
                (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1) as f64).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                agent: agent.to_string(),
                t: i + 1,
                mean_cum_regret: mean,
                std_cum_regret: std,
                n_seeds: k,
            }
        })
        .collect()
}

pub fn episode_agents(cfg: &ExperimentConfig, built: &BuiltEnv) -> Vec<EpisodeAgent> {
    let r = built.r_max();
    cfg.agents
        .iter()
        .map(|a| EpisodeAgent {
            label: a.label(),
            kind: a.kind.clone(),
            ir: a.ir_config(r, cfg.horizon),
        })
        .collect()
}

/// Runs every (agent, seed) pair. With `workers = Some(1)` everything runs
/// on the calling thread; results are identical either way.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let built = cfg.env.build(cfg.horizon)?;
    let agents = episode_agents(cfg, &built);
    let jobs: Vec<(usize, u64)> = (0..agents.len())
        .flat_map(|a| cfg.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let run = |&(a, s): &(usize, u64)| Cell {
        agent: agents[a].label.clone(),
        seed: s,
        result: run_episode(&built.env, &agents[a], cfg.horizon, s, &cfg.estimator),
    };
    let cells: Vec<Cell> = match cfg.workers {
        Some(1) => jobs.iter().map(run).collect(),
        w => {
            let mut b = rayon::ThreadPoolBuilder::new();
            if let Some(w) = w {
                b = b.num_threads(w);
            }
            let pool = b.build().map_err(|e| Error::Config(e.to_string()))?;
            pool.install(|| jobs.par_iter().map(run).collect())
        }
    };
    let mut summary = Vec::new();
    for a in &agents {
        let trajs: Vec<&Trajectory> = cells
            .iter()
            .filter(|c| c.agent == a.label)
            .filter_map(|c| c.result.as_ref().ok())
            .collect();
        summary.extend(summarize(&a.label, &trajs, cfg.horizon));
    }
    let metrics = compute_metrics(&built, cfg.horizon);
    Ok(ExperimentResult {
        cells,
        summary,
        metrics,
    })
}

pub fn trajectory_file_name(agent: &str, seed: u64) -> String {
    format!("traj_{agent}_seed{seed}.csv")
}

/// Writes trajectories, their sidecar metadata, the summary, failures and
/// (when enabled) the bound curves into `out`.
pub fn write_outputs(
    cfg: &ExperimentConfig,
    res: &ExperimentResult,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out)?;
    let built = cfg.env.build(cfg.horizon)?;
    let agents = episode_agents(cfg, &built);
    let h0 = policy_entropy(&Posterior::prior(built.env.support().clone()), &built.env);
    let mut written = Vec::new();
    for c in &res.cells {
        let Ok(tr) = &c.result else { continue };
        let p = out.join(trajectory_file_name(&c.agent, c.seed));
        tr.save(&p)?;
        let a = agents
            .iter()
            .position(|a| a.label == c.agent)
            .expect("agent label from config");
        let meta = TrajectoryMeta {
            agent: c.agent.clone(),
            agent_kind: agents[a].kind.clone(),
            alpha: agents[a].ir.alpha,
            lambda: agents[a].ir.lambda,
            seed: c.seed,
            horizon: cfg.horizon,
            true_atom: tr.true_atom,
            prior_policy_entropy: h0,
            metrics: res.metrics.clone(),
            env_meta: built.meta.clone(),
            config: cfg.clone(),
        };
        let mp = p.with_extension("meta.json");
        std::fs::write(&mp, serde_json::to_string_pretty(&meta)?)?;
        written.push(p);
    }
    let sp = out.join("summary.csv");
    let mut w = csv::Writer::from_path(&sp)?;
    for r in &res.summary {
        w.serialize(r)?;
    }
    w.flush()?;
    written.push(sp);
    let failures = res.failures();
    if !failures.is_empty() {
        let fp = out.join("failures.csv");
        let mut w = csv::Writer::from_path(&fp)?;
        w.write_record(["agent", "seed", "error"])?;
        for (a, s, e) in failures {
            w.write_record([a.to_string(), s.to_string(), e])?;
        }
        w.flush()?;
        written.push(fp);
    }
    if cfg.bound_overlays {
        let trajs: Vec<&Trajectory> = res
            .cells
            .iter()
            .filter_map(|c| c.result.as_ref().ok())
            .collect();
        let table = bound_overlays(&res.metrics, cfg.horizon, &trajs);
        let bp = out.join("bounds.csv");
        table.save(&bp)?;
        written.push(bp);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(workers: Option<usize>) -> ExperimentConfig {
        ExperimentConfig::parse(&format!(
            r#"
schema_version = 1
horizon = 15
seeds = [3, 4, 5]
bound_overlays = true
{}
[env]
kind = "example1"
k = 4

[[agents]]
kind = "conditional_ids"

[[agents]]
kind = "contextual_ids"
"#,
            workers
                .map(|w| format!("workers = {w}"))
                .unwrap_or_default()
        ))
        .unwrap()
    }

    #[test]
    fn files_and_determinism() {
        let c = cfg(Some(1));
        let r1 = run_experiment(&c).unwrap();
        let r2 = run_experiment(&cfg(Some(2))).unwrap();
        assert_eq!(r1.summary, r2.summary);
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let f1 = write_outputs(&c, &r1, d1.path()).unwrap();
        write_outputs(&c, &r2, d2.path()).unwrap();
        let csvs: Vec<_> = f1
            .iter()
            .filter(|p| {
                p.file_name()
                    .unwrap()
                    .to_str()
                    .unwrap()
                    .starts_with("traj_")
            })
            .collect();
        assert_eq!(csvs.len(), 6);
        for p in &f1 {
            let name = p.file_name().unwrap();
            assert_eq!(
                std::fs::read(p).unwrap(),
                std::fs::read(d2.path().join(name)).unwrap()
            );
        }
        assert!(d1.path().join("summary.csv").exists());
        assert!(d1.path().join("bounds.csv").exists());
    }

    #[test]
    fn summary_statistics() {
        let r = run_experiment(&cfg(Some(1))).unwrap();
        let last = r
            .summary
            .iter()
            .filter(|s| s.agent == "conditional_ids")
            .last()
            .unwrap();
        assert_eq!(last.n_seeds, 3);
        let totals: Vec<f64> = r
            .trajectories("conditional_ids")
            .iter()
            .map(|t| t.total_regret())
            .collect();
        let mean = totals.iter().sum::<f64>() / 3.0;
        assert!((last.mean_cum_regret - mean).abs() < 1e-12);
    }
}
