//! Directed feedback graphs, graph bandit environments and graph metrics.

mod instances;
mod metrics;

pub use instances::{
    make_example1, make_example2, make_theorem2_instance, random_graph_instance,
    random_strongly_observable, random_weakly_observable, GraphBanditEnv, RandomInstanceSpec,
};
pub use metrics::{
    classify_observability, explorability_graph, independence_number, independence_number_with_cap,
    weak_domination_number, weak_domination_number_with_cap, Explorability, GraphClass,
    GraphMetrics, Observability, VertexClass, DEFAULT_BETA_CAP, DEFAULT_DELTA_CAP,
};

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Directed graph over actions; `adj[i][j]` means playing `i` reveals `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedbackGraph {
    adj: Vec<Vec<bool>>,
}

impl FeedbackGraph {
    pub fn new(k: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("graph needs at least one vertex"));
        }
        let mut adj = vec![vec![false; k]; k];
        for &(i, j) in edges {
            if i >= k || j >= k {
                return Err(Error::invalid(format!(
                    "edge ({i}, {j}) out of range for k = {k}"
                )));
            }
            adj[i][j] = true;
        }
        Ok(Self { adj })
    }

    pub fn from_adjacency(adj: Vec<Vec<bool>>) -> Result<Self> {
        let k = adj.len();
        if k == 0 || adj.iter().any(|r| r.len() != k) {
            return Err(Error::invalid("adjacency must be a nonempty square matrix"));
        }
        Ok(Self { adj })
    }

    pub fn k(&self) -> usize {
        self.adj.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i][j]
    }

    pub fn adjacency(&self) -> &[Vec<bool>] {
        &self.adj
    }

    pub fn out_neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.k()).filter(|&j| self.adj[i][j]).collect()
    }

    pub fn in_neighbors(&self, j: usize) -> Vec<usize> {
        (0..self.k()).filter(|&i| self.adj[i][j]).collect()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e = Vec::new();
        for i in 0..self.k() {
            for j in 0..self.k() {
                if self.adj[i][j] {
                    e.push((i, j));
                }
            }
        }
        e
    }

    /// Parses "k" followed by "i j" edge lines; '#' starts a comment line.
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut k: Option<usize> = None;
        let mut edges = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Parse {
                path: path.to_string(),
                line: ln + 1,
                msg,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            match k {
                None => {
                    if fields.len() != 1 {
                        return Err(err("expected the vertex count on the first line".into()));
                    }
                    k = Some(
                        fields[0]
                            .parse()
                            .map_err(|e| err(format!("bad vertex count: {e}")))?,
                    );
                }
                Some(kk) => {
                    if fields.len() != 2 {
                        return Err(err("expected an edge \"i j\"".into()));
                    }
                    let i: usize = fields[0]
                        .parse()
                        .map_err(|e| err(format!("bad vertex: {e}")))?;
                    let j: usize = fields[1]
                        .parse()
                        .map_err(|e| err(format!("bad vertex: {e}")))?;
                    if i >= kk || j >= kk {
                        return Err(err(format!("edge ({i}, {j}) out of range for k = {kk}")));
                    }
                    edges.push((i, j));
                }
            }
        }
        let k = k.ok_or_else(|| Error::Parse {
            path: path.to_string(),
            line: 0,
            msg: "empty graph file".into(),
        })?;
        Self::new(k, &edges)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.k());
        for (i, j) in self.edges() {
            let _ = writeln!(s, "{i} {j}");
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        let g = FeedbackGraph::new(3, &[(0, 0), (0, 2), (2, 1)]).unwrap();
        let h = FeedbackGraph::parse(&g.to_text(), "mem").unwrap();
        assert_eq!(g, h);
    }

    #[test]
    fn parse_skips_comments_and_reports_lines() {
        let g = FeedbackGraph::parse("# demo\n2\n# edge\n0 1\n", "mem").unwrap();
        assert!(g.has_edge(0, 1));
        match FeedbackGraph::parse("2\n0 5\n", "f.txt") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn neighborhoods() {
        let g = FeedbackGraph::new(3, &[(0, 1), (2, 1), (1, 1)]).unwrap();
        assert_eq!(g.out_neighbors(0), vec![1]);
        assert_eq!(g.in_neighbors(1), vec![0, 1, 2]);
    }
}
