//! Regret-bound curves with every absolute constant set to 1. The values
//! are only meaningful up to constants and are labelled that way.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{BuiltEnv, EnvFamily};
use super::episode::Trajectory;
use crate::error::Result;
use crate::graph::{
    classify_observability, explorability_graph, independence_number, weak_domination_number,
    GraphClass,
};
use crate::sparse::c_min;

/// Instance constants used by bounds and audits. Missing entries are
/// `None` with a note in `warnings`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct BoundMetrics {
    pub k: usize,
    pub m: usize,
    pub r_max: f64,
    pub horizon: usize,
    pub graph_class: Option<String>,
    pub beta: Option<usize>,
    pub delta: Option<usize>,
    pub vartheta: Option<f64>,
    pub d: Option<usize>,
    pub s: Option<usize>,
    pub c_min: Option<f64>,
    pub warnings: Vec<String>,
}

pub fn compute_metrics(built: &BuiltEnv, horizon: usize) -> BoundMetrics {
    let env = &built.env;
    let mut m = BoundMetrics {
        k: env.num_actions(),
        m: env.num_contexts(),
        r_max: built.r_max(),
        horizon,
        ..Default::default()
    };
    match &built.family {
        EnvFamily::Graph(g) => {
            let class = classify_observability(g).class;
            m.graph_class = Some(
                match class {
                    GraphClass::StronglyObservable => "strongly_observable",
                    GraphClass::WeaklyObservable => "weakly_observable",
                    GraphClass::Unobservable => "unobservable",
                }
                .into(),
            );
            match independence_number(g) {
                Ok(b) => m.beta = Some(b),
                Err(e) => m.warnings.push(format!("beta omitted: {e}")),
            }
            match weak_domination_number(g) {
                Ok(d) => m.delta = d,
                Err(e) => m.warnings.push(format!("delta omitted: {e}")),
            }
            match explorability_graph(g, env.contexts(), env.xi()) {
                Ok(x) => m.vartheta = Some(x.value),
                Err(e) => m.warnings.push(format!("vartheta omitted: {e}")),
            }
        }
        EnvFamily::Sparse { features, s } => {
            m.d = Some(features.d());
            m.s = Some(*s);
            match c_min(features, env.xi(), 300, 1e-7) {
                Ok(r) => m.c_min = Some(r.value),
                Err(e) => m.warnings.push(format!("c_min omitted: {e}")),
            }
        }
    }
    m
}

/// Graph curve: `R_max min(sqrt(beta log(4k^2 sqrt(t)/beta) t M log k),
/// (2 M log k / vartheta)^(1/3) t^(2/3))`.
pub fn graph_bound(t: f64, beta: f64, k: f64, m: f64, vartheta: f64, r_max: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let (a, b) = graph_branches(t, beta, k, m, vartheta);
    r_max * a.min(b)
}

fn graph_branches(t: f64, beta: f64, k: f64, m: f64, vartheta: f64) -> (f64, f64) {
    let lk = m * k.ln();
    let sq = (beta * (4.0 * k * k * t.sqrt() / beta).ln() * t * lk)
        .max(0.0)
        .sqrt();
    let cu = if vartheta > 0.0 {
        (2.0 * lk / vartheta).cbrt() * t.powf(2.0 / 3.0)
    } else {
        f64::INFINITY
    };
    (sq, cu)
}

/// Sparse curve: `min(sqrt(t d s log(d sqrt(t)/s)),
/// s t^(2/3) log(d sqrt(t)/s)^(1/3) / C_min^(1/3))`.
pub fn sparse_bound(t: f64, d: f64, s: f64, c_min: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let l = (d * t.sqrt() / s).ln().max(0.0);
    let sq = (t * d * s * l).sqrt();
    let cu = if c_min > 0.0 {
        s * t.powf(2.0 / 3.0) * l.cbrt() / c_min.cbrt()
    } else {
        f64::INFINITY
    };
    sq.min(cu)
}

/// First `t` in `[lo, hi]` where the two graph branches meet, by a
/// geometric scan followed by bisection.
pub fn graph_crossover(beta: f64, k: f64, m: f64, vartheta: f64, lo: f64, hi: f64) -> Option<f64> {
    let f = |t: f64| {
        let (a, b) = graph_branches(t, beta, k, m, vartheta);
        a - b
    };
    let steps = 2000;
    let r = (hi / lo).powf(1.0 / steps as f64);
    let mut a = lo;
    let mut fa = f(a);
    for _ in 0..steps {
        let b = a * r;
        let fb = f(b);
        if fa == 0.0 {
            return Some(a);
        }
        if fa.signum() != fb.signum() {
            let (mut x, mut y) = (a, b);
            for _ in 0..200 {
                let mid = 0.5 * (x + y);
                if f(mid).signum() == fa.signum() {
                    x = mid;
                } else {
                    y = mid;
                }
            }
            return Some(0.5 * (x + y));
        }
        a = b;
        fa = fb;
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub curve: String,
    pub t: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundTable {
    pub rows: Vec<BoundRow>,
    pub warnings: Vec<String>,
}

impl BoundTable {
    pub fn curve(&self, name: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.curve == name)
            .map(|r| r.value)
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub const GRAPH_CURVE: &str = "graph_up_to_constants";
pub const SPARSE_CURVE: &str = "sparse_up_to_constants";

/// Curves for `t = 0..=n`. The generic curve per agent is
/// `sqrt(I_t t G_t)` with `G_t` the mean logged cumulative gain and `I_t`
/// the largest finite logged ratio so far.
pub fn bound_overlays(metrics: &BoundMetrics, n: usize, trajs: &[&Trajectory]) -> BoundTable {
    let mut table = BoundTable::default();
    let push = |curve: &str, f: &dyn Fn(f64) -> f64, rows: &mut Vec<BoundRow>| {
        for t in 0..=n {
            rows.push(BoundRow {
                curve: curve.to_string(),
                t,
                value: f(t as f64),
            });
        }
    };
    if metrics.graph_class.is_some() {
        match (metrics.beta, metrics.vartheta) {
            (Some(b), Some(v)) => {
                let (k, m, r) = (metrics.k as f64, metrics.m as f64, metrics.r_max);
                push(
                    GRAPH_CURVE,
                    &|t| graph_bound(t, b as f64, k, m, v, r),
                    &mut table.rows,
                );
            }
            _ => table
                .warnings
                .push("graph curve omitted: beta or vartheta missing".into()),
        }
    }
    if let (Some(d), Some(s)) = (metrics.d, metrics.s) {
        match metrics.c_min {
            Some(c) => push(
                SPARSE_CURVE,
                &|t| sparse_bound(t, d as f64, s as f64, c),
                &mut table.rows,
            ),
            None => table
                .warnings
                .push("sparse curve omitted: c_min missing".into()),
        }
    }
    let mut by_agent: BTreeMap<&str, Vec<&Trajectory>> = BTreeMap::new();
    for tr in trajs {
        by_agent.entry(&tr.agent).or_default().push(tr);
    }
    for (agent, ts) in by_agent {
        let gains: Vec<Vec<f64>> = ts.iter().map(|t| t.cum_info_gain()).collect();
        let mut worst = 0.0f64;
        let name = format!("generic_{agent}");
        table.rows.push(BoundRow {
            curve: name.clone(),
            t: 0,
            value: 0.0,
        });
        for i in 0..n {
            for tr in &ts {
                if let Some(r) = tr.rounds.get(i) {
                    if r.info_ratio.is_finite() {
                        worst = worst.max(r.info_ratio);
                    }
                }
            }
            let g: Vec<f64> = gains.iter().filter_map(|c| c.get(i).copied()).collect();
            let mean = g.iter().sum::<f64>() / g.len().max(1) as f64;
            table.rows.push(BoundRow {
                curve: name.clone(),
                t: i + 1,
                value: (worst * (i + 1) as f64 * mean).sqrt(),
            });
        }
    }
    table
}
