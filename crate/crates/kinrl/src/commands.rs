//! The subcommands: run sweeps in parallel, then assemble outputs in a fixed order.

use std::path::{Path, PathBuf};
use std::time::SystemTime;

use kinrl_core::experiment::{
    aggregate, run_discrimination, run_dispersal, stream_rng, Binning, ExperimentError, RunResult,
    NETWORK_STREAM,
};
use kinrl_core::network::build_partition_network_with_probs;
use kinrl_core::population::{
    check_reward_identities, run_sandbox, AlwaysReproduce, HealthThreshold, IdentityReport, Idle,
    PopulationTrace, QLearningPolicy, RandomReproduction, ReproductionPolicy, SandboxError,
};
use kinrl_core::{Action, QTable};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ConfigError, Loaded, Settings};
use crate::output::{canonical_json, config_hash, fixed, timestamp, Emitter, Manifest, Table};
use crate::plot::{render, Chart, Series};
use crate::settings::{DiscriminationSettings, DispersalSettings, PolicyKind, SandboxSettings};

/// Largest gap tolerated between replication and the change in combined reward.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot start worker pool: {0}")]
    Pool(String),
    #[error("reward identity check FAILED: {0}")]
    Identity(String),
}

impl RunError {
    /// 2 for usage and config problems, 1 for failures while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            _ => 1,
        }
    }
}

/// What a successful command wrote, plus lines worth printing.
#[derive(Debug)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub notes: Vec<String>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn emit(out: &mut Emitter, name: &str, bytes: &[u8]) -> Result<(), RunError> {
    let path = out.dir().join(name);
    out.emit(name, bytes).map(drop).map_err(io_err(&path))
}

fn emit_json<T: Serialize>(out: &mut Emitter, name: &str, value: &T) -> Result<(), RunError> {
    let path = out.dir().join(name);
    out.emit_json(name, value).map(drop).map_err(io_err(&path))
}

/// Writes `<command>.manifest.json` last, listing every other file.
fn finish<C: Settings>(
    mut out: Emitter,
    command: &str,
    loaded: &Loaded<C>,
    seeds: Vec<u64>,
    started: SystemTime,
) -> Result<Report, RunError> {
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        config_hash: config_hash(&loaded.config),
        config: serde_json::from_str(&canonical_json(&loaded.config)).expect("round trip"),
        config_file: loaded.path.as_ref().map(|p| p.display().to_string()),
        overrides: loaded.overrides.clone(),
        seeds,
        started_at: timestamp(started),
        finished_at: timestamp(SystemTime::now()),
        files: out.files().to_vec(),
    };
    emit_json(&mut out, &format!("{command}.manifest.json"), &manifest)?;
    let dir = out.dir().to_path_buf();
    Ok(Report {
        files: out
            .into_files()
            .into_iter()
            .map(|f| dir.join(f.path))
            .collect(),
        notes: Vec::new(),
    })
}

fn pool(parallelism: usize) -> Result<rayon::ThreadPool, RunError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))
}

fn q_table_csv<'a>(
    tables: impl IntoIterator<Item = (String, &'a QTable)>,
    arm: fn(usize) -> &'static str,
) -> Vec<u8> {
    let mut csv = Table::new(&["agent", "state", "action", "value"]);
    for (agent, table) in tables {
        for (state, action, value) in table.entries() {
            csv.row([
                agent.clone(),
                state.to_string(),
                arm(action).to_string(),
                value.to_string(),
            ]);
        }
    }
    csv.into_bytes()
}

fn game_arm(i: usize) -> &'static str {
    match Action::from_index(i) {
        Action::Cooperate => "C",
        Action::Defect => "D",
    }
}

fn sandbox_arm(i: usize) -> &'static str {
    if i == QLearningPolicy::REPRODUCE {
        "reproduce"
    } else {
        "idle"
    }
}

#[derive(Serialize)]
struct RunMeta {
    seed: u64,
    b: f64,
    c: f64,
    eta: Option<f64>,
    inclusive: bool,
    converged_at: Option<u64>,
    steps_run: u64,
    window_len: u64,
    mean_degree: f64,
    min_degree: usize,
    isolated_count: usize,
}

impl From<&RunResult> for RunMeta {
    fn from(r: &RunResult) -> Self {
        Self {
            seed: r.seed,
            b: r.params.b,
            c: r.params.c,
            eta: r.params.eta,
            inclusive: r.params.inclusive,
            converged_at: r.converged_at,
            steps_run: r.steps_run,
            window_len: r.window_len,
            mean_degree: r.degree.mean_degree,
            min_degree: r.degree.min_degree,
            isolated_count: r.degree.isolated_count,
        }
    }
}

pub fn discrimination(
    loaded: &Loaded<DiscriminationSettings>,
    out_dir: &Path,
) -> Result<Report, RunError> {
    let started = SystemTime::now();
    let cfg = &loaded.config;
    let points = cfg.points().map_err(invalid)?;
    let tasks: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|p| cfg.seeds.iter().map(move |&s| (p, s)))
        .collect();
    let results: Vec<RunResult> = pool(cfg.parallelism)?.install(|| {
        tasks
            .par_iter()
            .map(|&(p, seed)| run_discrimination(&points[p].1, seed))
            .collect::<Result<_, _>>()
    })?;

    let mut out = Emitter::new(out_dir);
    let mut csv = Table::new(&["c_over_b", "h", "coop_freq_mean", "coop_freq_se", "n_seeds"]);
    let mut series = Vec::new();
    for (group, (ratio, _)) in results.chunks(cfg.seeds.len()).zip(&points) {
        let rows = aggregate(group, Binning::BySimilarity)?;
        for row in &rows {
            csv.row([
                fixed(*ratio),
                fixed(row.key),
                fixed(row.mean),
                fixed(row.std_error),
                row.n.to_string(),
            ]);
        }
        series.push(Series {
            label: format!("c/b = {}", fixed(*ratio).trim_end_matches('0')),
            points: rows.iter().map(|r| (r.key, r.mean)).collect(),
            dashed: false,
        });
    }
    emit(&mut out, "discrimination.csv", &csv.into_bytes())?;
    let meta: Vec<RunMeta> = results.iter().map(RunMeta::from).collect();
    emit_json(&mut out, "discrimination.runs.json", &meta)?;
    if cfg.plot {
        let chart = Chart {
            title: if cfg.inclusive {
                "Inclusive reward"
            } else {
                "Individual reward"
            }
            .into(),
            x_label: "similarity h to opponent".into(),
            y_label: "cooperation frequency".into(),
            y_range: (0.0, 1.0),
            series,
        };
        emit(&mut out, "discrimination.svg", render(&chart).as_bytes())?;
    }
    if cfg.export_q_tables {
        for (r, &(p, seed)) in results.iter().zip(&tasks) {
            let name = format!(
                "qtables/discrimination_cb{}_seed{seed}.csv",
                fixed(points[p].0)
            );
            let tables = r
                .q_tables
                .iter()
                .enumerate()
                .map(|(i, q)| (i.to_string(), q));
            emit(&mut out, &name, &q_table_csv(tables, game_arm))?;
        }
    }
    let not_converged = results.iter().filter(|r| !r.converged()).count();
    let mut report = finish(out, "discrimination", loaded, cfg.seeds.clone(), started)?;
    report.notes.push(format!(
        "{} runs, {not_converged} hit steps_max before converging",
        results.len()
    ));
    Ok(report)
}

pub fn dispersal(loaded: &Loaded<DispersalSettings>, out_dir: &Path) -> Result<Report, RunError> {
    let started = SystemTime::now();
    let cfg = &loaded.config;
    let points = cfg.points().map_err(invalid)?;
    let tasks: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|p| cfg.seeds.iter().map(move |&s| (p, s)))
        .collect();
    let results: Vec<RunResult> = pool(cfg.parallelism)?.install(|| {
        tasks
            .par_iter()
            .map(|&(p, seed)| run_dispersal(&points[p].config, seed))
            .collect::<Result<_, _>>()
    })?;

    let mut out = Emitter::new(out_dir);
    let mut csv = Table::new(&[
        "eta",
        "b_over_c",
        "inclusive",
        "coop_prop_mean",
        "coop_prop_se",
        "n_seeds",
    ]);
    let mut series: Vec<(f64, bool, Series)> = Vec::new();
    for (group, point) in results.chunks(cfg.seeds.len()).zip(&points) {
        let row = aggregate(group, Binning::ByParameter)?[0];
        csv.row([
            fixed(point.eta),
            fixed(point.b_over_c),
            point.inclusive.to_string(),
            fixed(row.mean),
            fixed(row.std_error),
            row.n.to_string(),
        ]);
        match series
            .iter_mut()
            .find(|(e, i, _)| *e == point.eta && *i == point.inclusive)
        {
            Some((_, _, s)) => s.points.push((point.b_over_c, row.mean)),
            None => series.push((
                point.eta,
                point.inclusive,
                Series {
                    label: format!(
                        "eta={} {}",
                        point.eta,
                        if point.inclusive {
                            "inclusive"
                        } else {
                            "baseline"
                        }
                    ),
                    points: vec![(point.b_over_c, row.mean)],
                    dashed: !point.inclusive,
                },
            )),
        }
    }
    emit(&mut out, "dispersal.csv", &csv.into_bytes())?;
    let meta: Vec<RunMeta> = results.iter().map(RunMeta::from).collect();
    emit_json(&mut out, "dispersal.runs.json", &meta)?;
    if cfg.plot {
        let chart = Chart {
            title: "Limited dispersal".into(),
            x_label: "b / c".into(),
            y_label: "proportion of cooperators".into(),
            y_range: (0.0, 1.0),
            series: series.into_iter().map(|(_, _, s)| s).collect(),
        };
        emit(&mut out, "dispersal.svg", render(&chart).as_bytes())?;
    }
    if cfg.export_networks {
        export_networks(cfg, &mut out)?;
    }
    if cfg.export_q_tables {
        for (r, &(p, seed)) in results.iter().zip(&tasks) {
            let pt = &points[p];
            let name = format!(
                "qtables/dispersal_eta{}_bc{}_{}_seed{seed}.csv",
                fixed(pt.eta),
                fixed(pt.b_over_c),
                if pt.inclusive {
                    "inclusive"
                } else {
                    "baseline"
                }
            );
            let tables = r
                .q_tables
                .iter()
                .enumerate()
                .map(|(i, q)| (i.to_string(), q));
            emit(&mut out, &name, &q_table_csv(tables, game_arm))?;
        }
    }
    let isolated: usize = results.iter().map(|r| r.degree.isolated_count).sum();
    let mut report = finish(out, "dispersal", loaded, cfg.seeds.clone(), started)?;
    report.notes.push(format!(
        "{} runs, {isolated} isolated nodes in total",
        results.len()
    ));
    Ok(report)
}

/// The network each (eta, seed) pair is played on; it does not depend on b/c
/// or the reward variant.
fn export_networks(cfg: &DispersalSettings, out: &mut Emitter) -> Result<(), RunError> {
    let space = cfg.genotype.space().map_err(invalid)?;
    let genotypes = space.enumerate().map_err(ExperimentError::from)?;
    let mut etas = cfg.partition.eta.clone();
    etas.sort_by(f64::total_cmp);
    etas.dedup();
    for eta in etas {
        let probs = cfg.probabilities(eta).map_err(invalid)?;
        for &seed in &cfg.seeds {
            let mut rng = stream_rng(seed, NETWORK_STREAM);
            let net = build_partition_network_with_probs(
                cfg.partition.community_size,
                cfg.partition.community_count,
                probs,
                &genotypes,
                &mut rng,
            )
            .map_err(ExperimentError::from)?;
            let mut edges = Table::new(&["u", "v"]);
            for &(u, v) in net.edges() {
                edges.row([u.to_string(), v.to_string()]);
            }
            let mut nodes = Table::new(&["index", "community", "genotype"]);
            for i in 0..net.node_count() {
                nodes.row([
                    i.to_string(),
                    net.community_of(i).to_string(),
                    net.genotype_of(i).to_string(),
                ]);
            }
            let stem = format!("networks/eta{}_seed{seed}", fixed(eta));
            emit(out, &format!("{stem}_edges.csv"), &edges.into_bytes())?;
            emit(out, &format!("{stem}_nodes.csv"), &nodes.into_bytes())?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SandboxMeta {
    seed: u64,
    steps_run: usize,
    extinct_at: Option<u64>,
    final_population: usize,
    final_unique_genotypes: usize,
    records_checked: usize,
    max_replication_gap: f64,
    dominance_violations: usize,
    max_telescoping_gap: f64,
    max_health_residual: f64,
    identity_passed: bool,
}

fn trace_csvs(trace: &PopulationTrace) -> (Vec<u8>, Vec<u8>) {
    let mut rows = Table::new(&["t", "agent_id", "genotype", "health", "event"]);
    for r in &trace.rows {
        rows.row([
            r.t.to_string(),
            r.agent.to_string(),
            r.genotype.to_string(),
            r.health.to_string(),
            r.event.as_str().to_string(),
        ]);
    }
    let mut rewards = Table::new(&[
        "t",
        "agent_id",
        "r_longevity",
        "r_replication",
        "r_combined",
    ]);
    for r in &trace.rewards {
        rewards.row([
            r.t.to_string(),
            r.agent.to_string(),
            r.longevity.to_string(),
            r.replication.to_string(),
            r.combined.to_string(),
        ]);
    }
    (rows.into_bytes(), rewards.into_bytes())
}

pub fn sandbox(loaded: &Loaded<SandboxSettings>, out_dir: &Path) -> Result<Report, RunError> {
    let started = SystemTime::now();
    let cfg = &loaded.config;
    let core = cfg.to_core().map_err(invalid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut q_policy = None;
    let trace = match cfg.policy.kind {
        PolicyKind::Idle => run_sandbox(&core, &mut Idle, &mut rng)?,
        PolicyKind::Always => run_sandbox(&core, &mut AlwaysReproduce, &mut rng)?,
        PolicyKind::Random => {
            let mut policy = RandomReproduction::new(cfg.policy.probability)?;
            run_sandbox(&core, &mut policy, &mut rng)?
        }
        PolicyKind::Threshold => {
            let mut policy = HealthThreshold {
                min_health: cfg.policy.min_health,
            };
            run_sandbox(&core, &mut policy, &mut rng)?
        }
        PolicyKind::QLearning => {
            let learner = cfg.learner.to_core(cfg.steps.max(1)).map_err(invalid)?;
            let mut policy =
                QLearningPolicy::new(learner, cfg.policy.reward).map_err(SandboxError::from)?;
            let trace = run_sandbox(&core, &mut policy as &mut dyn ReproductionPolicy, &mut rng)?;
            q_policy = Some(policy);
            trace
        }
    };
    let report: IdentityReport = check_reward_identities(&trace).map_err(SandboxError::from)?;
    let passed = report.passed(IDENTITY_TOLERANCE);

    let mut out = Emitter::new(out_dir);
    let (rows, rewards) = trace_csvs(&trace);
    emit(&mut out, "sandbox_trace.csv", &rows)?;
    emit(&mut out, "sandbox_rewards.csv", &rewards)?;
    let last = trace
        .states
        .last()
        .expect("initial state is always recorded");
    let meta = SandboxMeta {
        seed: cfg.seed,
        steps_run: trace.steps(),
        extinct_at: trace.extinct_at,
        final_population: last.len(),
        final_unique_genotypes: last.unique_genotypes().len(),
        records_checked: report.records_checked,
        max_replication_gap: report.max_replication_gap,
        dominance_violations: report.dominance_violations,
        max_telescoping_gap: report.max_telescoping_gap,
        max_health_residual: report.max_health_residual,
        identity_passed: passed,
    };
    emit_json(&mut out, "sandbox.runs.json", &meta)?;
    if cfg.plot {
        let population: Vec<(f64, f64)> = trace
            .states
            .iter()
            .enumerate()
            .map(|(t, s)| (t as f64, s.len() as f64))
            .collect();
        let unique: Vec<(f64, f64)> = trace
            .states
            .iter()
            .enumerate()
            .map(|(t, s)| (t as f64, s.unique_genotypes().len() as f64))
            .collect();
        let peak = population.iter().map(|p| p.1).fold(1.0, f64::max);
        let chart = Chart {
            title: "Sandbox population".into(),
            x_label: "step".into(),
            y_label: "count".into(),
            y_range: (0.0, peak),
            series: vec![
                Series {
                    label: "agents".into(),
                    points: population,
                    dashed: false,
                },
                Series {
                    label: "unique genotypes".into(),
                    points: unique,
                    dashed: true,
                },
            ],
        };
        emit(&mut out, "sandbox.svg", render(&chart).as_bytes())?;
    }
    if let (true, Some(policy)) = (cfg.export_q_tables, &q_policy) {
        let tables = policy.tables().iter().map(|(id, q)| (id.to_string(), q));
        emit(
            &mut out,
            "sandbox_qtables.csv",
            &q_table_csv(tables, sandbox_arm),
        )?;
    }
    let summary = format!(
        "{} records, max |replication - delta combined| = {:e}, dominance violations = {}, max telescoping gap = {:e}",
        report.records_checked, report.max_replication_gap, report.dominance_violations, report.max_telescoping_gap
    );
    let mut done = finish(out, "sandbox", loaded, vec![cfg.seed], started)?;
    if !passed {
        return Err(RunError::Identity(summary));
    }
    done.notes
        .push(format!("reward identity check PASS: {summary}"));
    Ok(done)
}

fn invalid(e: crate::config::Invalid) -> RunError {
    RunError::Config(ConfigError::Invalid {
        location: "config".into(),
        key: e.key,
        message: e.message,
    })
}
