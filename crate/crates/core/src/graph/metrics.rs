use serde::Serialize;

use super::FeedbackGraph;
use crate::error::{Error, Result};
use crate::lp;
use crate::posterior::{ContextDistribution, Policy};

pub const DEFAULT_BETA_CAP: usize = 40;
pub const DEFAULT_DELTA_CAP: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexClass {
    Strong,
    Weak,
    Unobservable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphClass {
    StronglyObservable,
    WeaklyObservable,
    Unobservable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Observability {
    pub vertices: Vec<VertexClass>,
    pub class: GraphClass,
}

impl Observability {
    pub fn weak_vertices(&self) -> Vec<usize> {
        (0..self.vertices.len())
            .filter(|&v| self.vertices[v] == VertexClass::Weak)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphMetrics {
    pub beta: usize,
    pub delta: Option<usize>,
    pub observability: Observability,
    pub vartheta: f64,
}

pub fn classify_observability(g: &FeedbackGraph) -> Observability {
    let k = g.k();
    let vertices: Vec<VertexClass> = (0..k)
        .map(|v| {
            let ins = g.in_neighbors(v);
            if ins.is_empty() {
                VertexClass::Unobservable
            } else if g.has_edge(v, v) || (0..k).all(|u| u == v || g.has_edge(u, v)) {
                VertexClass::Strong
            } else {
                VertexClass::Weak
            }
        })
        .collect();
    let class = if vertices.contains(&VertexClass::Unobservable) {
        GraphClass::Unobservable
    } else if vertices.contains(&VertexClass::Weak) {
        GraphClass::WeaklyObservable
    } else {
        GraphClass::StronglyObservable
    };
    Observability { vertices, class }
}

/// Pairs joined by an edge in either direction, as bitmasks.
fn conflict_masks(g: &FeedbackGraph) -> Vec<u64> {
    let k = g.k();
    (0..k)
        .map(|i| {
            (0..k)
                .filter(|&j| j != i && (g.has_edge(i, j) || g.has_edge(j, i)))
                .fold(0u64, |m, j| m | (1u64 << j))
        })
        .collect()
}

/// Size of a greedy clique cover of `p`; bounds any independent subset.
fn clique_cover_bound(mut p: u64, nb: &[u64]) -> u32 {
    let mut count = 0;
    while p != 0 {
        let v = p.trailing_zeros() as usize;
        let mut cand = p & nb[v];
        p &= !(1u64 << v);
        while cand != 0 {
            let u = cand.trailing_zeros() as usize;
            cand &= nb[u];
            p &= !(1u64 << u);
        }
        count += 1;
    }
    count
}

fn mis(p: u64, size: u32, best: &mut u32, nb: &[u64]) {
    if p == 0 {
        *best = (*best).max(size);
        return;
    }
    if size + p.count_ones() <= *best || size + clique_cover_bound(p, nb) <= *best {
        return;
    }
    // Branch on the vertex with the most conflicts inside p.
    let mut v = p.trailing_zeros() as usize;
    let mut deg = (nb[v] & p).count_ones();
    let mut rest = p & !(1u64 << v);
    while rest != 0 {
        let u = rest.trailing_zeros() as usize;
        rest &= !(1u64 << u);
        let d = (nb[u] & p).count_ones();
        if d > deg {
            v = u;
            deg = d;
        }
    }
    if deg == 0 {
        *best = (*best).max(size + p.count_ones());
        return;
    }
    let bit = 1u64 << v;
    mis(p & !bit & !nb[v], size + 1, best, nb);
    mis(p & !bit, size, best, nb);
}

pub fn independence_number(g: &FeedbackGraph) -> Result<usize> {
    independence_number_with_cap(g, DEFAULT_BETA_CAP)
}

/// Exact maximum independent set size (edges conflict in either direction;
/// self-loops do not exclude a vertex).
pub fn independence_number_with_cap(g: &FeedbackGraph, cap: usize) -> Result<usize> {
    let k = g.k();
    if k > cap || k > 64 {
        return Err(Error::CapExceeded {
            what: "independence number search",
            size: k,
            cap: cap.min(64),
        });
    }
    let nb = conflict_masks(g);
    let all = if k == 64 { u64::MAX } else { (1u64 << k) - 1 };
    let mut best = 0;
    mis(all, 0, &mut best, &nb);
    Ok(best as usize)
}

pub fn weak_domination_number(g: &FeedbackGraph) -> Result<Option<usize>> {
    weak_domination_number_with_cap(g, DEFAULT_DELTA_CAP)
}

fn cover(uncovered: u64, chosen: usize, best: &mut usize, ins: &[u64], outs: &[u64]) {
    if uncovered == 0 {
        *best = (*best).min(chosen);
        return;
    }
    if chosen + 1 >= *best {
        return;
    }
    // The uncovered vertex with the fewest possible dominators.
    let mut w = uncovered.trailing_zeros() as usize;
    let mut rest = uncovered;
    while rest != 0 {
        let u = rest.trailing_zeros() as usize;
        rest &= !(1u64 << u);
        if ins[u].count_ones() < ins[w].count_ones() {
            w = u;
        }
    }
    let mut cands = ins[w];
    while cands != 0 {
        let d = cands.trailing_zeros() as usize;
        cands &= !(1u64 << d);
        cover(uncovered & !outs[d], chosen + 1, best, ins, outs);
    }
}

/// Smallest set whose out-neighborhoods cover every weakly observable
/// vertex; `None` when there is no such vertex.
pub fn weak_domination_number_with_cap(g: &FeedbackGraph, cap: usize) -> Result<Option<usize>> {
    let k = g.k();
    if k > cap || k > 64 {
        return Err(Error::CapExceeded {
            what: "weak domination search",
            size: k,
            cap: cap.min(64),
        });
    }
    let obs = classify_observability(g);
    let w = obs.weak_vertices();
    if w.is_empty() {
        return Ok(None);
    }
    let outs: Vec<u64> = (0..k)
        .map(|i| {
            g.out_neighbors(i)
                .iter()
                .fold(0u64, |m, &j| m | (1u64 << j))
        })
        .collect();
    let ins: Vec<u64> = (0..k)
        .map(|j| g.in_neighbors(j).iter().fold(0u64, |m, &i| m | (1u64 << i)))
        .collect();
    let target = w.iter().fold(0u64, |m, &v| m | (1u64 << v));
    if let Some(&v) = w.iter().find(|&&v| ins[v] == 0) {
        return Err(Error::invalid(format!(
            "weak vertex {v} has no in-neighbor"
        )));
    }
    let mut best = w.len() + 1;
    cover(target, 0, &mut best, &ins, &outs);
    Ok(Some(best))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Explorability {
    pub value: f64,
    pub witness: Policy,
}

/// Coverage of the least-observed vertex under `policy`.
pub fn coverage_value(
    g: &FeedbackGraph,
    contexts: &[Vec<usize>],
    xi: &ContextDistribution,
    policy: &Policy,
) -> f64 {
    let k = g.k();
    (0..k)
        .map(|d| {
            let mut s = 0.0;
            for (m, ctx) in contexts.iter().enumerate() {
                for (j, &a) in ctx.iter().enumerate() {
                    if g.has_edge(a, d) {
                        s += xi.probs()[m] * policy.row(m)[j];
                    }
                }
            }
            s
        })
        .fold(f64::INFINITY, f64::min)
}

/// `max_pi min_d P(d in N_out(a))` with `s ~ xi`, `a ~ pi(.|s)`, via the
/// linear program `max t` over rows of `pi` with `sum_a pi(a|m) <= 1`.
pub fn explorability_graph(
    g: &FeedbackGraph,
    contexts: &[Vec<usize>],
    xi: &ContextDistribution,
) -> Result<Explorability> {
    if contexts.len() != xi.len() {
        return Err(Error::invalid("need one probability per context"));
    }
    let k = g.k();
    for (m, ctx) in contexts.iter().enumerate() {
        if ctx.is_empty() {
            return Err(Error::invalid(format!("context {m} has no actions")));
        }
        if ctx.iter().any(|&a| a >= k) {
            return Err(Error::invalid(format!(
                "context {m} names an action outside the graph"
            )));
        }
    }
    let offsets: Vec<usize> = contexts
        .iter()
        .scan(0, |acc, c| {
            let o = *acc;
            *acc += c.len();
            Some(o)
        })
        .collect();
    let nvar = offsets.last().unwrap() + contexts.last().unwrap().len() + 1;
    let tcol = nvar - 1;
    let mut c = vec![0.0; nvar];
    c[tcol] = 1.0;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for d in 0..k {
        let mut row = vec![0.0; nvar];
        row[tcol] = 1.0;
        for (m, ctx) in contexts.iter().enumerate() {
            for (j, &act) in ctx.iter().enumerate() {
                if g.has_edge(act, d) {
                    row[offsets[m] + j] = -xi.probs()[m];
                }
            }
        }
        a.push(row);
        b.push(0.0);
    }
    for (m, ctx) in contexts.iter().enumerate() {
        let mut row = vec![0.0; nvar];
        for j in 0..ctx.len() {
            row[offsets[m] + j] = 1.0;
        }
        a.push(row);
        b.push(1.0);
    }
    let sol = lp::maximize(&c, &a, &b)?;
    let rows: Vec<Vec<f64>> = contexts
        .iter()
        .enumerate()
        .map(|(m, ctx)| {
            let r: Vec<f64> = (0..ctx.len())
                .map(|j| sol.x[offsets[m] + j].max(0.0))
                .collect();
            let s: f64 = r.iter().sum();
            if s > 0.0 {
                r.iter().map(|x| x / s).collect()
            } else {
                vec![1.0 / ctx.len() as f64; ctx.len()]
            }
        })
        .collect();
    let witness = Policy::new(rows)?;
    let value = coverage_value(g, contexts, xi, &witness).clamp(0.0, 1.0);
    Ok(Explorability { value, witness })
}
