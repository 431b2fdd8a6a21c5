//! Experiment runner: scenario configs, oracle series, CSV and JSON output.

mod metrics;
mod scenario;

pub use metrics::{moving_average, read_csv, rows_to_csv, write_csv, MetricsRow, CSV_HEADER};
pub use scenario::{default_schedule, Environment, Event, FrameState, ScenarioKind, ScheduledEvent};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::agent::{Agent, AgentConfig, FrameResult, KMode};
use crate::baselines::{all_edge, all_local, run_baseline, BaselineKind, EXHAUSTIVE_MAX_N};
use crate::channel::{make_topology, Topology};
use crate::error::{Error, Result};
use crate::policy::{PolicyNet, TrainConfig, DEFAULT_HIDDEN};
use crate::quantizer::QuantizerKind;
use crate::solver::SolverConfig;
use crate::system::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KModeName {
    #[default]
    Fixed,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    Exhaustive,
    Cd,
    None,
}

impl OracleKind {
    fn baseline(self) -> Option<BaselineKind> {
        match self {
            OracleKind::Exhaustive => Some(BaselineKind::Exhaustive),
            OracleKind::Cd => Some(BaselineKind::Cd),
            OracleKind::None => None,
        }
    }

    /// Exhaustive where it is affordable, CD above that.
    pub fn default_for(n: usize) -> Self {
        if n <= EXHAUSTIVE_MAX_N {
            OracleKind::Exhaustive
        } else {
            OracleKind::Cd
        }
    }
}

/// Everything needed to reproduce a run. Optional fields are filled in by
/// [`RunConfig::resolve`]; the resolved form is what the JSON sidecar holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    pub n: usize,
    pub frames: u64,
    pub seed: u64,
    pub k_mode: KModeName,
    /// Fixed candidate count; defaults to `n`.
    pub k: Option<usize>,
    pub delta: u64,
    pub quantizer: QuantizerKind,
    /// Defaults to [`OracleKind::default_for`].
    pub oracle: Option<OracleKind>,
    pub train: TrainConfig,
    pub hidden: Vec<usize>,
    pub solver: SolverConfig,
    pub threads: usize,
    /// When false every `wall_us` is written as 0, making output files
    /// byte-reproducible.
    pub record_timing: bool,
    pub system: Option<SystemParams>,
    pub distances: Option<Vec<f64>>,
    pub schedule: Option<Vec<ScheduledEvent>>,
    /// Policy snapshot to start from instead of a fresh network.
    pub initial_policy: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: ScenarioKind::Baseline,
            n: 10,
            frames: 10_000,
            seed: 1,
            k_mode: KModeName::Fixed,
            k: None,
            delta: 32,
            quantizer: QuantizerKind::OrderPreserving,
            oracle: None,
            train: TrainConfig::default(),
            hidden: DEFAULT_HIDDEN.to_vec(),
            solver: SolverConfig::default(),
            threads: 1,
            record_timing: true,
            system: None,
            distances: None,
            schedule: None,
            initial_policy: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json(origin, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::json("run config", e))
    }

    /// Fills every optional field and validates the result.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = self.clone();
        if c.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if c.frames == 0 {
            return Err(Error::Config("frames must be at least 1".into()));
        }
        let system = c.system.take().unwrap_or_else(|| SystemParams::reference(c.n));
        if system.n != c.n {
            return Err(Error::Config(format!("system.n = {} but n = {}", system.n, c.n)));
        }
        system.validate()?;
        if c.distances.is_none() {
            c.distances = Some(make_topology(c.n, c.seed, &system)?.distances);
        }
        if c.schedule.is_none() {
            c.schedule = Some(default_schedule(c.scenario, c.frames, c.seed, &system.weights));
        }
        c.k.get_or_insert(c.n);
        c.oracle.get_or_insert(OracleKind::default_for(c.n));
        c.system = Some(system);
        if c.oracle == Some(OracleKind::Exhaustive) && c.n > EXHAUSTIVE_MAX_N && !c.scenario.is_sweep() {
            return Err(Error::Config(format!(
                "exhaustive oracle supports n <= {EXHAUSTIVE_MAX_N}; use --oracle cd"
            )));
        }
        c.agent_config()?.validate(c.n)?;
        c.environment()?;
        Ok(c)
    }

    fn system(&self) -> SystemParams {
        self.system.clone().unwrap_or_else(|| SystemParams::reference(self.n))
    }

    pub fn agent_config(&self) -> Result<AgentConfig> {
        let k_mode = match self.k_mode {
            KModeName::Fixed => KMode::Fixed { k: self.k.unwrap_or(self.n) },
            KModeName::Adaptive => KMode::Adaptive { delta: self.delta },
        };
        Ok(AgentConfig {
            quantizer: self.quantizer,
            k_mode,
            train: self.train,
            hidden: self.hidden.clone(),
            solver: self.solver,
            threads: self.threads,
        })
    }

    pub fn environment(&self) -> Result<Environment> {
        let system = self.system();
        let topology = match &self.distances {
            Some(d) => Topology::from_distances(d.clone(), &system)?,
            None => make_topology(self.n, self.seed, &system)?,
        };
        let schedule = match &self.schedule {
            Some(s) => s.clone(),
            None => default_schedule(self.scenario, self.frames, self.seed, &system.weights),
        };
        Environment::new(system, topology, self.seed, self.frames, schedule)
    }

    /// Key shared by runs whose oracle series are identical.
    fn oracle_key(&self) -> Result<String> {
        let key = (
            self.n,
            self.frames,
            self.seed,
            &self.oracle,
            &self.system,
            &self.distances,
            &self.schedule,
            &self.solver,
        );
        serde_json::to_string(&key).map_err(|e| Error::json("oracle key", e))
    }
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads <= 1 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Per-frame oracle rate for frames `1..=frames`, or all `None` when the
/// oracle is disabled.
pub fn oracle_series(env: &Environment, oracle: OracleKind, solver: &SolverConfig, threads: usize) -> Result<Vec<Option<f64>>> {
    oracle_series_from(env, oracle, solver, threads, 1)
}

/// Like [`oracle_series`] but leaves frames before `first` as `None`.
pub fn oracle_series_from(
    env: &Environment,
    oracle: OracleKind,
    solver: &SolverConfig,
    threads: usize,
    first: u64,
) -> Result<Vec<Option<f64>>> {
    let Some(kind) = oracle.baseline() else {
        return Ok(vec![None; env.frames as usize]);
    };
    let one = |t: u64| -> Result<Option<f64>> {
        if t < first {
            return Ok(None);
        }
        let state = env.state(t);
        let p = env.params_for(&state);
        Ok(Some(run_baseline(kind, &state.frame, &p, solver)?.1.q))
    };
    with_pool(threads, || {
        if threads > 1 {
            (1..=env.frames).into_par_iter().map(one).collect()
        } else {
            (1..=env.frames).map(one).collect()
        }
    })?
}

pub struct RunOutput {
    pub rows: Vec<MetricsRow>,
    pub frames: Vec<FrameResult>,
    pub agent: Agent,
}

/// Runs the agent over a resolved config. `oracle` may supply a
/// precomputed [`oracle_series`] for the same environment.
pub fn run_droo(cfg: &RunConfig, oracle: Option<&[Option<f64>]>) -> Result<RunOutput> {
    let env = cfg.environment()?;
    let computed;
    let oracle = match oracle {
        Some(o) => {
            if o.len() as u64 != cfg.frames {
                return Err(Error::LengthMismatch { expected: cfg.frames as usize, got: o.len() });
            }
            o
        }
        None => {
            let kind = cfg.oracle.unwrap_or(OracleKind::default_for(cfg.n));
            computed = oracle_series(&env, kind, &cfg.solver, cfg.threads)?;
            &computed[..]
        }
    };
    let agent_cfg = cfg.agent_config()?;
    let mut agent = match &cfg.initial_policy {
        Some(path) => Agent::with_network(env.params.clone(), agent_cfg, cfg.seed, PolicyNet::load(path)?)?,
        None => Agent::new(env.params.clone(), agent_cfg, cfg.seed)?,
    };
    let mut rows = Vec::with_capacity(cfg.frames as usize);
    let mut frames = Vec::with_capacity(cfg.frames as usize);
    for t in 1..=cfg.frames {
        let state = env.state(t);
        if agent.params().weights != state.weights {
            agent.set_weights(state.weights.clone())?;
        }
        let r = agent.step(&state.frame)?;
        let q_oracle = oracle[(t - 1) as usize];
        rows.push(MetricsRow {
            t,
            q_droo: r.alloc.q,
            q_oracle,
            q_hat: MetricsRow::normalized(r.alloc.q, q_oracle),
            k_star: r.k_star,
            k_t: r.k_used,
            loss: r.loss,
            wall_us: if cfg.record_timing { r.wall_us } else { 0 },
        });
        frames.push(r);
    }
    Ok(RunOutput { rows, frames, agent })
}

/// Writes `csv` and the resolved config beside it (same stem, `.json`).
pub fn write_run(cfg: &RunConfig, rows: &[MetricsRow], csv: &Path) -> Result<()> {
    write_csv(csv, rows)?;
    let sidecar = csv.with_extension("json");
    std::fs::write(&sidecar, cfg.to_json()?).map_err(|e| Error::io(sidecar, e))
}

/// Runs `(label, config)` pairs, sharing oracle series between runs with
/// the same environment.
fn run_variants(variants: Vec<(String, RunConfig)>, dir: &Path) -> Result<Vec<(String, RunConfig, Vec<MetricsRow>)>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut cache: HashMap<String, Vec<Option<f64>>> = HashMap::new();
    let mut out = Vec::with_capacity(variants.len());
    for (label, cfg) in variants {
        let cfg = cfg.resolve()?;
        let key = cfg.oracle_key()?;
        if !cache.contains_key(&key) {
            let env = cfg.environment()?;
            let series = oracle_series(&env, cfg.oracle.expect("resolved"), &cfg.solver, cfg.threads)?;
            cache.insert(key.clone(), series);
        }
        let run = run_droo(&cfg, Some(&cache[&key]))?;
        write_run(&cfg, &run.rows, &dir.join(format!("{label}.csv")))?;
        out.push((label, cfg, run.rows));
    }
    Ok(out)
}

fn sweep_variants(base: &RunConfig) -> Vec<(String, RunConfig)> {
    let mut single = base.clone();
    single.scenario = ScenarioKind::Baseline;
    single.schedule = Some(Vec::new());
    let n = base.n;
    let mut v = Vec::new();
    match base.scenario {
        ScenarioKind::QuantizerSweep => {
            let mut ks = vec![1, 2, n / 2, n];
            ks.retain(|&k| k >= 1 && k <= n + 1);
            ks.dedup();
            for (q, name) in [(QuantizerKind::OrderPreserving, "op"), (QuantizerKind::Knn, "knn")] {
                for &k in &ks {
                    let mut c = single.clone();
                    c.quantizer = q;
                    c.k_mode = KModeName::Fixed;
                    c.k = Some(k);
                    v.push((format!("{name}_k{k}"), c));
                }
            }
        }
        ScenarioKind::DeltaSweep => {
            for delta in [1, 2, 4, 8, 16, 32, 64, 128] {
                let mut c = single.clone();
                c.k_mode = KModeName::Adaptive;
                c.delta = delta;
                v.push((format!("delta_{delta}"), c));
            }
        }
        ScenarioKind::HyperSweep => {
            for m in [128, 256, 512, 1024, 2048] {
                let mut c = single.clone();
                c.train.memory_size = m;
                c.train.batch_size = c.train.batch_size.min(m);
                v.push((format!("memory_{m}"), c));
            }
            for b in [32, 64, 128, 256, 512, 1024] {
                let mut c = single.clone();
                c.train.batch_size = b;
                c.train.memory_size = c.train.memory_size.max(b);
                v.push((format!("batch_{b}"), c));
            }
            for i in [5, 10, 20, 50, 100] {
                let mut c = single.clone();
                c.train.train_interval = i;
                v.push((format!("interval_{i}"), c));
            }
            for lr in [0.1, 0.01, 0.001, 0.0001] {
                let mut c = single.clone();
                c.train.learning_rate = lr;
                v.push((format!("lr_{lr}"), c));
            }
        }
        ScenarioKind::RateCompare => {
            for n in [10, 20, 30] {
                let mut c = single.clone();
                c.n = n;
                c.k = None;
                c.system = None;
                c.distances = None;
                c.oracle = Some(if n <= 10 { OracleKind::Exhaustive } else { OracleKind::Cd });
                v.push((format!("n{n}"), c));
            }
        }
        _ => {}
    }
    v
}

/// Mean rates over the final fifth of a rate-compare run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateSummary {
    pub n: usize,
    pub oracle: OracleKind,
    pub eval_frames: u64,
    pub q_droo: f64,
    pub q_oracle: f64,
    pub q_local: f64,
    pub q_edge: f64,
    pub q_hat: f64,
}

pub fn rate_summary(cfg: &RunConfig, rows: &[MetricsRow]) -> Result<RateSummary> {
    let env = cfg.environment()?;
    let eval = (cfg.frames / 5).max(1);
    let tail = &rows[rows.len() - eval as usize..];
    let mean = |it: &mut dyn Iterator<Item = f64>| {
        let (s, c) = it.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        if c == 0 { f64::NAN } else { s / c as f64 }
    };
    let mut local = 0.0;
    let mut edge = 0.0;
    for r in tail {
        let state = env.state(r.t);
        let p = env.params_for(&state);
        local += all_local(&state.frame, &p, &cfg.solver)?.q;
        edge += all_edge(&state.frame, &p, &cfg.solver)?.q;
    }
    Ok(RateSummary {
        n: cfg.n,
        oracle: cfg.oracle.unwrap_or(OracleKind::default_for(cfg.n)),
        eval_frames: eval,
        q_droo: mean(&mut tail.iter().map(|r| r.q_droo)),
        q_oracle: mean(&mut tail.iter().filter_map(|r| r.q_oracle)),
        q_local: local / eval as f64,
        q_edge: edge / eval as f64,
        q_hat: mean(&mut tail.iter().filter_map(|r| r.q_hat)),
    })
}

fn write_summary(path: &Path, rows: &[RateSummary]) -> Result<()> {
    let mut s = String::from("n,oracle,eval_frames,q_droo,q_oracle,q_local,q_edge,q_hat\n");
    for r in rows {
        let oracle = match r.oracle {
            OracleKind::Exhaustive => "exhaustive",
            OracleKind::Cd => "cd",
            OracleKind::None => "none",
        };
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.n, oracle, r.eval_frames, r.q_droo, r.q_oracle, r.q_local, r.q_edge, r.q_hat
        ));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Runs a scenario. Single-run scenarios write `out` (CSV) plus its JSON
/// sidecar; sweeps treat `out` as a directory of `<label>.csv` files.
/// Returns the CSV paths written.
pub fn run_scenario(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    if !cfg.scenario.is_sweep() {
        let cfg = cfg.resolve()?;
        let run = run_droo(&cfg, None)?;
        write_run(&cfg, &run.rows, out)?;
        return Ok(vec![out.to_path_buf()]);
    }
    let results = run_variants(sweep_variants(cfg), out)?;
    if cfg.scenario == ScenarioKind::RateCompare {
        let summaries = results
            .iter()
            .map(|(_, c, rows)| rate_summary(c, rows))
            .collect::<Result<Vec<_>>>()?;
        write_summary(&out.join("summary.csv"), &summaries)?;
    }
    Ok(results.into_iter().map(|(label, _, _)| out.join(format!("{label}.csv"))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(frames: u64) -> RunConfig {
        RunConfig { n: 4, frames, seed: 9, record_timing: false, ..RunConfig::default() }
    }

    #[test]
    fn resolve_fills_everything() {
        let c = small(20).resolve().unwrap();
        assert_eq!(c.k, Some(4));
        assert_eq!(c.oracle, Some(OracleKind::Exhaustive));
        assert_eq!(c.distances.as_ref().unwrap().len(), 4);
        assert_eq!(c.schedule, Some(Vec::new()));
        assert_eq!(c.resolve().unwrap(), c);
    }

    #[test]
    fn unknown_field_is_reported_with_position() {
        let err = RunConfig::from_json("{\n  \"n\": 4,\n  \"frobs\": 1\n}", "cfg.json").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("cfg.json") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn exhaustive_refused_above_limit() {
        let c = RunConfig { n: 13, oracle: Some(OracleKind::Exhaustive), ..small(5) };
        assert!(c.resolve().is_err());
    }

    #[test]
    fn oracle_bounds_droo_rate() {
        let c = small(60).resolve().unwrap();
        let run = run_droo(&c, None).unwrap();
        assert_eq!(run.rows.len(), 60);
        for r in &run.rows {
            let q_hat = r.q_hat.unwrap();
            assert!(q_hat <= 1.0 + 1e-9 && q_hat > 0.0);
            assert!(r.k_star >= 1 && r.k_star <= r.k_t);
        }
    }

    #[test]
    fn sweep_labels() {
        let base = RunConfig { scenario: ScenarioKind::QuantizerSweep, ..RunConfig::default() };
        let labels: Vec<String> = sweep_variants(&base).into_iter().map(|v| v.0).collect();
        assert_eq!(labels, ["op_k1", "op_k2", "op_k5", "op_k10", "knn_k1", "knn_k2", "knn_k5", "knn_k10"]);
        let base = RunConfig { scenario: ScenarioKind::RateCompare, ..RunConfig::default() };
        let v = sweep_variants(&base);
        assert_eq!(v.iter().map(|x| x.1.n).collect::<Vec<_>>(), [10, 20, 30]);
        assert_eq!(v[2].1.oracle, Some(OracleKind::Cd));
    }
}
