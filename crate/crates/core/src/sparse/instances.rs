use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{FeatureMap, SparseLinearEnv};
use crate::error::{Error, Result};
use crate::posterior::{ContextDistribution, NoiseModel, ParamSupport};

/// Largest `d` for which all `2^d` corners may be enumerated.
pub const FULL_CORNER_MAX_DIM: usize = 16;

/// Which sign patterns make up the informative set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HMode {
    /// All corners when `2^d <= 256`, otherwise the Hadamard subset.
    #[default]
    Auto,
    Full,
    Hadamard,
}

/// Rows of a Sylvester-Hadamard matrix of order `2^ceil(log2(d + 1))`,
/// restricted to columns `1..=d`. Every column is balanced and distinct
/// columns are orthogonal, so the rows' second moment is the identity.
pub fn hadamard_rows(d: usize) -> Vec<Vec<f64>> {
    let mut order = 1;
    while order < d + 1 {
        order *= 2;
    }
    (0..order)
        .map(|r: usize| {
            (1..=d)
                .map(|c: usize| {
                    if (r & c).count_ones() % 2 == 0 {
                        1.0
                    } else {
                        -1.0
                    }
                })
                .collect()
        })
        .collect()
}

fn all_corners(d: usize) -> Vec<Vec<f64>> {
    (0..1usize << d)
        .map(|mask| {
            (0..d)
                .map(|j| if mask >> j & 1 == 1 { -1.0 } else { 1.0 })
                .collect()
        })
        .collect()
}

/// Single context whose actions are all corners of `{-1, 1}^d`.
pub fn make_hypercube_features(d: usize) -> Result<FeatureMap> {
    if d == 0 || d > FULL_CORNER_MAX_DIM {
        return Err(Error::CapExceeded {
            what: "hypercube corner enumeration",
            size: d,
            cap: FULL_CORNER_MAX_DIM,
        });
    }
    FeatureMap::new(vec![all_corners(d)])
}

pub fn make_theorem3_instance(
    p: usize,
    s: usize,
    n: usize,
    kappa: f64,
    gap: Option<f64>,
) -> Result<SparseLinearEnv> {
    make_theorem3_instance_with(p, s, n, kappa, gap, HMode::Auto)
}

/// Two contexts in dimension `d + 1`, `d = s p`. Context 1 holds `x0 = 0`
/// and the informative set `H` (entries `+-kappa`, last coordinate 1);
/// context 2 is the multi-task set of `s` stacked basis vectors. Atoms are
/// `(gap e_{j_1}, ..., gap e_{j_s}, -1)`, uniformly rescaled to unit norm, so
/// `x0` is optimal in context 1 whenever `s kappa gap < 1`.
pub fn make_theorem3_instance_with(
    p: usize,
    s: usize,
    n: usize,
    kappa: f64,
    gap: Option<f64>,
    mode: HMode,
) -> Result<SparseLinearEnv> {
    if p < 2 || s < 1 || n == 0 {
        return Err(Error::invalid("need p >= 2, s >= 1 and n >= 1"));
    }
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::invalid("kappa must lie in (0, 1]"));
    }
    let gap = gap.unwrap_or(0.5 * (p as f64 / n as f64).sqrt());
    if !(gap > 0.0 && gap.is_finite()) {
        return Err(Error::invalid("gap must be positive"));
    }
    let d = s * p;
    let full = match mode {
        HMode::Full => {
            if d > FULL_CORNER_MAX_DIM {
                return Err(Error::CapExceeded {
                    what: "informative corner enumeration",
                    size: d,
                    cap: FULL_CORNER_MAX_DIM,
                });
            }
            true
        }
        HMode::Hadamard => false,
        HMode::Auto => d <= 8,
    };
    let signs = if full {
        all_corners(d)
    } else {
        hadamard_rows(d)
    };

    let mut ctx1 = vec![vec![0.0; d + 1]];
    for sg in &signs {
        let mut x: Vec<f64> = sg.iter().map(|v| kappa * v).collect();
        x.push(1.0);
        ctx1.push(x);
    }
    let tuples = index_tuples(p, s);
    let ctx2: Vec<Vec<f64>> = tuples
        .iter()
        .map(|t| {
            let mut x = vec![0.0; d + 1];
            for (b, &j) in t.iter().enumerate() {
                x[b * p + j] = 1.0;
            }
            x
        })
        .collect();
    let features = FeatureMap::new(vec![ctx1, ctx2])?;

    let norm = (1.0 + s as f64 * gap * gap).sqrt();
    let scale = if norm > 1.0 { 1.0 / norm } else { 1.0 };
    let params: Vec<Vec<f64>> = tuples
        .iter()
        .map(|t| {
            let mut th = vec![0.0; d + 1];
            for (b, &j) in t.iter().enumerate() {
                th[b * p + j] = gap * scale;
            }
            th[d] = -scale;
            th
        })
        .collect();
    let support = ParamSupport::uniform(params)?;
    let xi = ContextDistribution::uniform(2)?;
    let mut env = SparseLinearEnv::with_nnz_cap(
        features,
        xi,
        support,
        s,
        s + 1,
        NoiseModel::Gaussian { std: 1.0 },
    )?;
    env.meta = vec![
        ("p".into(), p as f64),
        ("s".into(), s as f64),
        ("d".into(), d as f64),
        ("n".into(), n as f64),
        ("kappa".into(), kappa),
        ("gap".into(), gap),
        ("atom_scale".into(), scale),
        ("informative_actions".into(), signs.len() as f64),
        ("full_corners".into(), if full { 1.0 } else { 0.0 }),
    ];
    Ok(env)
}

fn index_tuples(p: usize, s: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..s {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..p).map(move |j| {
                    let mut u = t.clone();
                    u.push(j);
                    u
                })
            })
            .collect();
    }
    out
}

/// Random sparse instance: `contexts` contexts of `k` Gaussian feature
/// vectors normalized to unit length, and `atoms` random `s`-sparse unit
/// parameters.
pub fn random_sparse_instance<R: Rng + ?Sized>(
    d: usize,
    s: usize,
    contexts: usize,
    k: usize,
    atoms: usize,
    rng: &mut R,
) -> Result<SparseLinearEnv> {
    use rand_distr::StandardNormal;
    if s == 0 || s > d || contexts == 0 || k == 0 || atoms == 0 {
        return Err(Error::invalid("need 1 <= s <= d and positive sizes"));
    }
    let unit = |v: Vec<f64>| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        v.into_iter().map(|x| x / n).collect::<Vec<f64>>()
    };
    let table: Vec<Vec<Vec<f64>>> = (0..contexts)
        .map(|_| {
            (0..k)
                .map(|_| {
                    unit(
                        (0..d)
                            .map(|_| rng.sample::<f64, _>(StandardNormal))
                            .collect(),
                    )
                })
                .collect()
        })
        .collect();
    let params: Vec<Vec<f64>> = (0..atoms)
        .map(|_| {
            let mut idx: Vec<usize> = (0..d).collect();
            for i in 0..s {
                let j = rng.random_range(i..d);
                idx.swap(i, j);
            }
            let mut th = vec![0.0; d];
            for &j in &idx[..s] {
                th[j] = rng.sample::<f64, _>(StandardNormal);
            }
            unit(th)
        })
        .collect();
    SparseLinearEnv::new(
        FeatureMap::new(table)?,
        ContextDistribution::uniform(contexts)?,
        ParamSupport::uniform(params)?,
        s,
        NoiseModel::Gaussian { std: 1.0 },
    )
}
