use rayon::prelude::*;
use serde::Serialize;

use super::episode::{run_episode, EpisodeAgent, Trajectory};
use crate::error::Result;
use crate::graph::make_example2;
use crate::ids::{AgentKind, IRConfig};
use crate::infogain::InfoGainConfig;

/// The pre-registered grid for the over-exploration example.
pub const EXAMPLE2_GRID: [f64; 3] = [0.5, 1.0, 2.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub c_rev: f64,
    pub c_gap: f64,
    /// Mean pulls of the context-2 revealing action per seed.
    pub conditional_reveals: f64,
    pub contextual_reveals: f64,
    pub conditional_regret: f64,
    pub contextual_regret: f64,
}

impl SweepCell {
    pub fn reveal_ratio(&self) -> f64 {
        self.conditional_reveals / self.contextual_reveals
    }

    pub fn regret_ratio(&self) -> f64 {
        self.conditional_regret / self.contextual_regret
    }
}

/// Runs conditional and contextual IDS on every `(c_rev, c_gap)` pair of
/// the grid. Jobs run in parallel but results are folded in grid order.
pub fn example2_sweep(
    k: usize,
    n: usize,
    seeds: &[u64],
    grid: &[(f64, f64)],
    gain_cfg: &InfoGainConfig,
) -> Result<Vec<SweepCell>> {
    let agents = [AgentKind::ConditionalIds, AgentKind::ContextualIds].map(|kind| EpisodeAgent {
        label: kind.label(),
        kind,
        ir: IRConfig::default(),
    });
    let envs = grid
        .iter()
        .map(|&(r, g)| make_example2(k, n, r, g))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize, u64)> = (0..grid.len())
        .flat_map(|c| (0..2).flat_map(move |a| seeds.iter().map(move |&s| (c, a, s))))
        .collect();
    let runs: Vec<Result<Trajectory>> = jobs
        .par_iter()
        .map(|&(c, a, s)| run_episode(&envs[c].env, &agents[a], n, s, gain_cfg))
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let per = 2 * seeds.len();
    Ok(grid
        .iter()
        .enumerate()
        .map(|(c, &(c_rev, c_gap))| {
            let cell = &runs[c * per..(c + 1) * per];
            let (cond, ctx) = cell.split_at(seeds.len());
            let reveals = |ts: &[Trajectory]| {
                ts.iter().map(|t| t.count_action(1, 1) as f64).sum::<f64>() / ts.len() as f64
            };
            let regret = |ts: &[Trajectory]| {
                ts.iter().map(Trajectory::total_regret).sum::<f64>() / ts.len() as f64
            };
            SweepCell {
                c_rev,
                c_gap,
                conditional_reveals: reveals(cond),
                contextual_reveals: reveals(ctx),
                conditional_regret: regret(cond),
                contextual_regret: regret(ctx),
            }
        })
        .collect())
}

pub fn example2_grid() -> Vec<(f64, f64)> {
    EXAMPLE2_GRID
        .iter()
        .flat_map(|&r| EXAMPLE2_GRID.iter().map(move |&g| (r, g)))
        .collect()
}
