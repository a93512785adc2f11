//! Sparse linear contextual bandits: feature maps, environments, the
//! informative-set hard instance, and the feature explorability design.

mod design;
mod eigen;
mod instances;

pub use design::{c_min, design_upper_bound, DesignResult};
pub use eigen::{symmetric_eigen, SymEigen};
pub use instances::{
    hadamard_rows, make_hypercube_features, make_theorem3_instance, make_theorem3_instance_with,
    random_sparse_instance, HMode, FULL_CORNER_MAX_DIM,
};

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::posterior::{r_max, ContextDistribution, NoiseModel, ParamSupport};

/// `phi(m, a)` for every context `m` and local action `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    table: Vec<Vec<Vec<f64>>>,
    d: usize,
}

impl FeatureMap {
    pub fn new(table: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if table.is_empty() || table.iter().any(|c| c.is_empty()) {
            return Err(Error::invalid(
                "every context needs at least one feature vector",
            ));
        }
        let d = table[0][0].len();
        if d == 0 {
            return Err(Error::invalid("feature dimension must be positive"));
        }
        for c in &table {
            for v in c {
                if v.len() != d {
                    return Err(Error::invalid("feature vectors differ in dimension"));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::invalid("feature entries must be finite"));
                }
            }
        }
        Ok(Self { table, d })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn num_contexts(&self) -> usize {
        self.table.len()
    }

    pub fn context(&self, m: usize) -> &[Vec<f64>] {
        &self.table[m]
    }

    pub fn phi(&self, m: usize, a: usize) -> &[f64] {
        &self.table[m][a]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.table.iter().map(Vec::len).collect()
    }

    /// Columnar text: header "M k d", then "m a v_1 ... v_d" per line.
    /// Context `m` holds the actions listed for it, which must be
    /// `0..k_m` without gaps.
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut header: Option<(usize, usize, usize)> = None;
        let mut rows: Vec<Vec<Option<Vec<f64>>>> = Vec::new();
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
            let f: Vec<&str> = line.split_whitespace().collect();
            match header {
                None => {
                    if f.len() != 3 {
                        return Err(err("expected header \"M k d\"".into()));
                    }
                    let p = |s: &str| {
                        s.parse::<usize>()
                            .map_err(|e| err(format!("bad header: {e}")))
                    };
                    let (m, k, d) = (p(f[0])?, p(f[1])?, p(f[2])?);
                    header = Some((m, k, d));
                    rows = vec![vec![None; k]; m];
                }
                Some((mm, k, d)) => {
                    if f.len() != d + 2 {
                        return Err(err(format!("expected {} fields, found {}", d + 2, f.len())));
                    }
                    let m: usize = f[0].parse().map_err(|e| err(format!("bad context: {e}")))?;
                    let a: usize = f[1].parse().map_err(|e| err(format!("bad action: {e}")))?;
                    if m >= mm || a >= k {
                        return Err(err(format!("index ({m}, {a}) out of range")));
                    }
                    let v = f[2..]
                        .iter()
                        .map(|s| s.parse::<f64>().map_err(|e| err(format!("bad value: {e}"))))
                        .collect::<Result<Vec<_>>>()?;
                    if rows[m][a].is_some() {
                        return Err(err(format!("duplicate entry ({m}, {a})")));
                    }
                    rows[m][a] = Some(v);
                }
            }
        }
        if header.is_none() {
            return Err(Error::Parse {
                path: path.to_string(),
                line: 0,
                msg: "empty feature file".into(),
            });
        }
        let mut table = Vec::new();
        for (m, r) in rows.into_iter().enumerate() {
            let n = r.iter().take_while(|x| x.is_some()).count();
            if r[n..].iter().any(Option::is_some) {
                return Err(Error::Parse {
                    path: path.to_string(),
                    line: 0,
                    msg: format!("context {m} has a gap in its action indices"),
                });
            }
            table.push(r.into_iter().take(n).map(Option::unwrap).collect());
        }
        Self::new(table)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let k = self.table.iter().map(Vec::len).max().unwrap_or(0);
        let mut s = format!("{} {} {}\n", self.table.len(), k, self.d);
        for (m, c) in self.table.iter().enumerate() {
            for (a, v) in c.iter().enumerate() {
                let _ = write!(s, "{m} {a}");
                for x in v {
                    let _ = write!(s, " {x}");
                }
                s.push('\n');
            }
        }
        s
    }
}

/// Linear environment `f(m, a, theta) = phi(m, a).theta` with bandit feedback.
/// Global action ids enumerate `(m, a)` context by context.
#[derive(Debug, Clone)]
pub struct SparseLinearEnv {
    pub features: FeatureMap,
    pub env: Environment,
    pub s: usize,
    pub meta: Vec<(String, f64)>,
}

pub(crate) fn nonzeros(v: &[f64]) -> usize {
    v.iter().filter(|&&x| x != 0.0).count()
}

impl SparseLinearEnv {
    /// Every atom must have at most `nnz_cap` nonzeros and norm at most 1.
    pub fn with_nnz_cap(
        features: FeatureMap,
        xi: ContextDistribution,
        support: ParamSupport,
        s: usize,
        nnz_cap: usize,
        noise: NoiseModel,
    ) -> Result<Self> {
        if s == 0 {
            return Err(Error::invalid("sparsity s must be at least 1"));
        }
        if support.dim() != features.d() {
            return Err(Error::invalid("parameter and feature dimensions differ"));
        }
        for (i, th) in support.params().iter().enumerate() {
            if nonzeros(th) > nnz_cap {
                return Err(Error::invalid(format!(
                    "atom {i} has more than {nnz_cap} nonzeros"
                )));
            }
            let norm = th.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1.0 + 1e-9 {
                return Err(Error::invalid(format!("atom {i} has norm {norm} > 1")));
            }
        }
        let mut contexts = Vec::new();
        let mut phis: Vec<Vec<f64>> = Vec::new();
        for m in 0..features.num_contexts() {
            let start = phis.len();
            phis.extend(features.context(m).iter().cloned());
            contexts.push((start..phis.len()).collect());
        }
        let reveals = (0..phis.len()).map(|a| vec![a]).collect();
        let env = Environment::new(
            phis.len(),
            contexts,
            xi,
            Arc::new(support),
            noise,
            reveals,
            |th, a| phis[a].iter().zip(th).map(|(x, y)| x * y).sum(),
        )?;
        Ok(Self {
            features,
            env,
            s,
            meta: Vec::new(),
        })
    }

    pub fn new(
        features: FeatureMap,
        xi: ContextDistribution,
        support: ParamSupport,
        s: usize,
        noise: NoiseModel,
    ) -> Result<Self> {
        Self::with_nnz_cap(features, xi, support, s, s, noise)
    }

    pub fn meta_value(&self, key: &str) -> Option<f64> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    /// Feature vector of global action `a`.
    pub fn phi_global(&self, a: usize) -> &[f64] {
        let mut rest = a;
        for m in 0..self.features.num_contexts() {
            let n = self.features.context(m).len();
            if rest < n {
                return self.features.phi(m, rest);
            }
            rest -= n;
        }
        panic!("action {a} out of range")
    }
}

/// Atoms whose optimal action in some context has more than `s` nonzero
/// features, as `(atom, context)` pairs.
pub fn check_sparse_optimal_actions(env: &SparseLinearEnv) -> (bool, Vec<(usize, usize)>) {
    let mut bad = Vec::new();
    for i in 0..env.env.support().len() {
        for m in 0..env.env.num_contexts() {
            let a = env.env.optimal_local(i, m);
            if nonzeros(env.features.phi(m, a)) > env.s {
                bad.push((i, m));
            }
        }
    }
    (bad.is_empty(), bad)
}

/// `((R_max^2 + 1) d / 2, s^2 / (4 C_min))`, the second infinite when
/// `C_min = 0`.
pub fn lemma4_bounds(env: &SparseLinearEnv, c_min_value: f64) -> (f64, f64) {
    bounds_from(r_max(&env.env), env.features.d(), env.s, c_min_value)
}

pub fn bounds_from(r_max: f64, d: usize, s: usize, c_min_value: f64) -> (f64, f64) {
    let squared = (r_max * r_max + 1.0) * d as f64 / 2.0;
    let cubic = if c_min_value > 0.0 {
        (s * s) as f64 / (4.0 * c_min_value)
    } else {
        f64::INFINITY
    };
    (squared, cubic)
}
