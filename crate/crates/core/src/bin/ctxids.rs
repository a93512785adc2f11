use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use ctxids::graph::{
    classify_observability, explorability_graph, independence_number, weak_domination_number,
    FeedbackGraph,
};
use ctxids::harness::{
    audit_lemmas, grid_size, oracle_gridsearch_cir, oracle_gridsearch_mir, run_experiment,
    write_outputs, AuditContext, ExperimentConfig, Trajectory, TrajectoryMeta, GRID_LIMIT,
};
use ctxids::ids::{contextual_inputs, minimize_cir, minimize_mir, AgentKind, IRConfig};
use ctxids::infogain::{cond_info_gain, param_info_gain, GainTarget};
use ctxids::posterior::regret_vector;
use ctxids::sparse::{c_min, FeatureMap};
use ctxids::{ContextDistribution, Error, Posterior};

#[derive(Parser)]
#[command(
    name = "ctxids",
    version,
    about = "Information-directed sampling lab for contextual bandits"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every (agent, seed) pair of a config and write CSV outputs.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Independence number, weak domination number, observability and
    /// explorability of a feedback graph.
    Metrics {
        #[arg(long)]
        graph: PathBuf,
        /// TOML file with `contexts = [[...], ...]` and/or `probs = [...]`.
        #[arg(long)]
        xi: Option<PathBuf>,
    },
    /// Explorability constant of a feature map.
    Design {
        #[arg(long)]
        features: PathBuf,
        /// TOML file with `probs = [...]`, one entry per context.
        #[arg(long)]
        xi: PathBuf,
    },
    /// Compare the ratio minimizers with grid search at the prior.
    Oracle {
        #[arg(long)]
        config: PathBuf,
    },
    /// Check logged ratios and gains against their bounds.
    Audit {
        /// Trajectory CSV written by `run`; its `.meta.json` sidecar must
        /// sit next to it. Repeat to audit several seeds together.
        #[arg(long, required = true)]
        trajectory: Vec<PathBuf>,
    },
}

/// Exit code plus message.
struct Failure(u8, String);

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure(1, e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> Failure {
    Failure(2, e.to_string())
}

type Outcome = std::result::Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Run {
            config,
            out,
            workers,
        } => cmd_run(&config, &out, workers),
        Cmd::Metrics { graph, xi } => cmd_metrics(&graph, xi.as_deref()),
        Cmd::Design { features, xi } => cmd_design(&features, &xi),
        Cmd::Oracle { config } => cmd_oracle(&config),
        Cmd::Audit { trajectory } => cmd_audit(&trajectory),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn cmd_run(config: &Path, out: &Path, workers: Option<usize>) -> Outcome {
    let mut cfg = ExperimentConfig::load(config).map_err(config_err)?;
    if workers.is_some() {
        cfg.workers = workers;
    }
    cfg.validate().map_err(config_err)?;
    cfg.env.build(cfg.horizon).map_err(config_err)?;
    let res = run_experiment(&cfg).map_err(runtime_err)?;
    let files = write_outputs(&cfg, &res, out).map_err(runtime_err)?;
    println!("wrote {} files to {}", files.len(), out.display());
    for a in &cfg.agents {
        let label = a.label();
        if let Some(last) = res.summary.iter().filter(|r| r.agent == label).last() {
            println!(
                "{label}: mean cumulative regret {:.4} (std {:.4}, {} seeds)",
                last.mean_cum_regret, last.std_cum_regret, last.n_seeds
            );
        }
    }
    for w in &res.metrics.warnings {
        println!("warning: {w}");
    }
    let failures = res.failures();
    for (a, s, e) in &failures {
        eprintln!("failed: {a} seed {s}: {e}");
    }
    Ok(if failures.is_empty() { 0 } else { 2 })
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct XiFile {
    contexts: Option<Vec<Vec<usize>>>,
    probs: Option<Vec<f64>>,
}

fn read_xi(path: &Path) -> std::result::Result<XiFile, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn cmd_metrics(graph: &Path, xi: Option<&Path>) -> Outcome {
    let g = FeedbackGraph::read(graph).map_err(config_err)?;
    let xf = match xi {
        Some(p) => read_xi(p)?,
        None => XiFile::default(),
    };
    let contexts = xf.contexts.unwrap_or_else(|| vec![(0..g.k()).collect()]);
    let law = match xf.probs {
        Some(p) => ContextDistribution::new(p),
        None => ContextDistribution::uniform(contexts.len()),
    }
    .map_err(config_err)?;
    let obs = classify_observability(&g);
    println!("k = {}", g.k());
    println!("observability = {:?}", obs.class);
    match independence_number(&g) {
        Ok(b) => println!("beta = {b}"),
        Err(e) => println!("beta = unavailable ({e})"),
    }
    match weak_domination_number(&g) {
        Ok(Some(d)) => println!("delta = {d}"),
        Ok(None) => println!("delta = undefined (graph is not observable)"),
        Err(e) => println!("delta = unavailable ({e})"),
    }
    let x = explorability_graph(&g, &contexts, &law).map_err(config_err)?;
    println!("vartheta = {:.9}", x.value);
    for (m, row) in x.witness.rows().iter().enumerate() {
        println!("witness[{m}] = {}", fmt_row(row));
    }
    Ok(0)
}

fn cmd_design(features: &Path, xi: &Path) -> Outcome {
    let f = FeatureMap::read(features).map_err(config_err)?;
    let xf = read_xi(xi)?;
    let law = match xf.probs {
        Some(p) => ContextDistribution::new(p),
        None => ContextDistribution::uniform(f.num_contexts()),
    }
    .map_err(config_err)?;
    let r = c_min(&f, &law, 300, 1e-7).map_err(runtime_err)?;
    println!("c_min = {:.9}", r.value);
    println!("upper_bound = {:.9}", r.upper_bound);
    println!("certificate_gap = {:.3e}", r.certificate_gap);
    if r.rank_deficient {
        println!("features do not span R^{}", f.d());
    }
    for (m, row) in r.witness.rows().iter().enumerate() {
        println!("witness[{m}] = {}", fmt_row(row));
    }
    Ok(0)
}

fn fmt_row(row: &[f64]) -> String {
    let parts: Vec<String> = row.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Finest of a few resolutions whose grid stays under the oracle limit.
fn pick_resolution(sizes: &[usize]) -> Option<f64> {
    [1e-3, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.25, 0.5]
        .into_iter()
        .find(|&r| {
            grid_size(sizes, r)
                .map(|n| n <= GRID_LIMIT / 10)
                .unwrap_or(false)
        })
}

fn cmd_oracle(config: &Path) -> Outcome {
    let cfg = ExperimentConfig::load(config).map_err(config_err)?;
    let built = cfg.env.build(cfg.horizon).map_err(config_err)?;
    let env = &built.env;
    let post = Posterior::prior(env.support().clone());
    let gcfg = cfg.estimator;
    let mut bad = 0;
    for a in &cfg.agents {
        let ir = a.ir_config(built.r_max(), cfg.horizon);
        match a.kind {
            AgentKind::ContextualIds | AgentKind::SampledContextualIds { .. } => {
                bad += oracle_mir(a.label(), env, &post, &gcfg, &ir)?;
            }
            _ => {
                for m in 0..env.num_contexts() {
                    let delta = regret_vector(&post, m, env).map_err(runtime_err)?;
                    let gain = match gcfg.target {
                        GainTarget::Parameter => {
                            let all = param_info_gain(&post, env, &gcfg).map_err(runtime_err)?;
                            env.actions(m).iter().map(|&x| all.values[x]).collect()
                        }
                        _ => {
                            cond_info_gain(&post, m, env, &gcfg)
                                .map_err(runtime_err)?
                                .values
                        }
                    };
                    let Some(res) = pick_resolution(&[delta.len()]) else {
                        println!("{} context {m}: grid too large, skipped", a.label());
                        continue;
                    };
                    let s = minimize_cir(&delta, &gain, &ir).map_err(runtime_err)?;
                    let (_, v) = oracle_gridsearch_cir(
                        &delta,
                        &gain,
                        ir.alpha,
                        ir.lambda,
                        res,
                        ir.info_floor,
                    )
                    .map_err(runtime_err)?;
                    let ok = s.ratio <= v + 1e-6 * v.abs().max(1.0);
                    bad += usize::from(!ok);
                    println!(
                        "{} context {m}: minimizer {:.9} grid({res}) {:.9} {}",
                        a.label(),
                        s.ratio,
                        v,
                        if ok { "ok" } else { "WORSE" }
                    );
                }
            }
        }
    }
    Ok(if bad == 0 { 0 } else { 3 })
}

fn oracle_mir(
    label: String,
    env: &ctxids::Environment,
    post: &Posterior,
    gcfg: &ctxids::InfoGainConfig,
    ir: &IRConfig,
) -> std::result::Result<usize, Failure> {
    let (deltas, gains) = contextual_inputs(post, env, gcfg).map_err(runtime_err)?;
    let sizes: Vec<usize> = deltas.iter().map(Vec::len).collect();
    let Some(res) = pick_resolution(&sizes) else {
        println!("{label}: grid too large, skipped");
        return Ok(0);
    };
    let s = minimize_mir(&deltas, &gains, env.xi(), ir).map_err(runtime_err)?;
    let o = oracle_gridsearch_mir(
        &deltas,
        &gains,
        env.xi(),
        ir.alpha,
        ir.lambda,
        res,
        ir.info_floor,
    )
    .map_err(runtime_err)?;
    let ok = s.ratio <= o.value + 1e-5 * o.value.abs().max(1.0);
    println!(
        "{label}: minimizer {:.9} grid({res}, {} points) {:.9} {}",
        s.ratio,
        o.points,
        o.value,
        if ok { "ok" } else { "WORSE" }
    );
    Ok(usize::from(!ok))
}

fn cmd_audit(paths: &[PathBuf]) -> Outcome {
    let mut trajs = Vec::new();
    let mut metas = Vec::new();
    for p in paths {
        trajs.push(Trajectory::load(p).map_err(config_err)?);
        let mp = p.with_extension("meta.json");
        let text = std::fs::read_to_string(&mp)
            .map_err(|e| config_err(format!("{}: {e}", mp.display())))?;
        let meta: TrajectoryMeta =
            serde_json::from_str(&text).map_err(|e| config_err(Error::from(e)))?;
        metas.push(meta);
    }
    if metas.iter().any(|m| m.agent != metas[0].agent) {
        return Err(config_err("all trajectories must come from the same agent"));
    }
    let ctx = AuditContext::from_meta(&metas[0]);
    let refs: Vec<&Trajectory> = trajs.iter().collect();
    let report = audit_lemmas(&refs, &ctx);
    for c in &report.checks {
        if !c.applicable {
            println!("{}: skipped ({})", c.name, c.note);
            continue;
        }
        println!(
            "{}: {} rounds, bound {:.6}, min margin {:.6}, {} violations",
            c.name,
            c.evaluated,
            c.bound,
            c.min_margin,
            c.violations.len()
        );
        for v in c.violations.iter().take(5) {
            println!("  t={} value={:.6} bound={:.6}", v.t, v.value, v.bound);
        }
    }
    Ok(if report.total_violations() == 0 { 0 } else { 3 })
}
